"""Pure-Python reference kernels.

Same signatures and arithmetic order as ``_ckernels.pyx``; the PT kernels are
bit-identical to the compiled ones given the same uniforms.
"""
import math

import numpy as np

BACKEND = "python"


def metropolis_sweep(indptr, indices, data, spins, energy, T, uniforms):
    """One sequential Metropolis pass over all spins; returns the new energy."""
    n = spins.shape[0]
    ip = indptr.tolist()
    ix = indices.tolist()
    dv = data.tolist()
    s = spins.tolist()
    u = uniforms.tolist()
    for i in range(n):
        h = 0.0
        for p in range(ip[i], ip[i + 1]):
            h += dv[p] * s[ix[p]]
        d = -4.0 * s[i] * h
        if d <= 0.0 or u[i] < math.exp(-d / T):
            s[i] = -s[i]
            energy += d
    spins[:] = s
    return energy


def pt_rounds(indptr, indices, data, spins, energies, slots, temps,
              flip_u, swap_u, round0, best_config, best_energy, best_round):
    """Run ``flip_u.shape[0]`` PT rounds in place.

    ``slots[k]`` is the replica row currently at temperature ``temps[k]``.
    Returns ``(best_energy, best_round)``; ``best_config`` is updated in place.
    """
    n_rounds, n_rep, n = flip_u.shape
    ip = indptr.tolist()
    ix = indices.tolist()
    dv = data.tolist()
    S = [row.tolist() for row in spins]
    E = energies.tolist()
    slot = slots.tolist()
    Ts = temps.tolist()
    best_row = -1
    for r in range(n_rounds):
        for k in range(n_rep):
            row = slot[k]
            s = S[row]
            T = Ts[k]
            u = flip_u[r, k].tolist()
            e = E[row]
            for i in range(n):
                h = 0.0
                for p in range(ip[i], ip[i + 1]):
                    h += dv[p] * s[ix[p]]
                d = -4.0 * s[i] * h
                if d <= 0.0 or u[i] < math.exp(-d / T):
                    s[i] = -s[i]
                    e += d
            E[row] = e
        for k in range(n_rep):
            row = slot[k]
            if E[row] < best_energy:
                best_energy = E[row]
                best_round = round0 + r + 1
                best_config[:] = S[row]
        parity = (round0 + r) % 2
        for k in range(parity, n_rep - 1, 2):
            a = slot[k]
            b = slot[k + 1]
            x = (1.0 / Ts[k] - 1.0 / Ts[k + 1]) * (E[a] - E[b])
            if x >= 0.0 or swap_u[r, k] < math.exp(x):
                slot[k] = b
                slot[k + 1] = a
    for row in range(n_rep):
        spins[row] = S[row]
    energies[:] = E
    slots[:] = slot
    return best_energy, best_round


def csr_energy(indptr, indices, data, spins):
    s = np.asarray(spins, dtype=np.float64)
    n = s.shape[0]
    total = 0.0
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        total += s[i] * float(np.dot(data[lo:hi], s[indices[lo:hi]]))
    return total


def cac_run(indptr, indices, data, x, e, gauss, t0, best_energy, best_config,
            alpha, beta, gamma, pump, dt, mu, rho, delta, noise, t_c, x_limit):
    """Integrate ``gauss.shape[0]`` explicit Euler-Maruyama CAC steps in place.

    ``beta`` is applied to ``sum_j J_ij x_j`` as given; the caller chooses its
    sign.  Returns ``(best_energy, best_step, steps_done, t, diverged)``.
    """
    n = x.shape[0]
    steps = gauss.shape[0]
    J = np.zeros((n, n))
    for i in range(n):
        J[i, indices[indptr[i]:indptr[i + 1]]] = data[indptr[i]:indptr[i + 1]]
    sq = math.sqrt(dt)
    s = np.where(x < 0, -1.0, 1.0)
    e_cur = float(s @ (J @ s))
    t = t0
    best_step = 0
    for k in range(steps):
        a = alpha + rho * math.tanh(delta * (e_cur - best_energy))
        xi = gamma * (t - t_c)
        if xi < 0.0:
            xi = 0.0
        h = J @ x
        x2 = x * x
        x_new = x + dt * ((pump - 1.0) * x - mu * x2 * x + beta * e * h) + noise * sq * gauss[k]
        e[:] = e + dt * (-xi * (x2 - a) * e)
        x[:] = x_new
        t += dt
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(e))) or np.any(np.abs(x) > x_limit):
            return best_energy, best_step, k + 1, t, True
        s = np.where(x < 0, -1.0, 1.0)
        e_cur = float(s @ (J @ s))
        if e_cur < best_energy:
            best_energy = e_cur
            best_step = k + 1
            best_config[:] = s
    return best_energy, best_step, steps, t, False
