# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; see ``_pykernels`` for the reference semantics."""
from libc.math cimport exp, tanh, sqrt, fabs, isfinite

import numpy as np

BACKEND = "cython"


cdef inline double _field(const long long[::1] indptr, const long long[::1] indices,
                          const double[::1] data, signed char[::1] s, Py_ssize_t i) noexcept nogil:
    cdef double h = 0.0
    cdef long long p
    for p in range(indptr[i], indptr[i + 1]):
        h += data[p] * s[indices[p]]
    return h


cdef inline double _sweep(const long long[::1] indptr, const long long[::1] indices,
                          const double[::1] data, signed char[::1] s, double energy,
                          double T, const double[::1] u) noexcept nogil:
    cdef Py_ssize_t i, n = s.shape[0]
    cdef double d
    for i in range(n):
        d = -4.0 * s[i] * _field(indptr, indices, data, s, i)
        if d <= 0.0 or u[i] < exp(-d / T):
            s[i] = -s[i]
            energy += d
    return energy


def metropolis_sweep(const long long[::1] indptr, const long long[::1] indices,
                     const double[::1] data, signed char[::1] spins, double energy,
                     double T, const double[::1] uniforms):
    with nogil:
        energy = _sweep(indptr, indices, data, spins, energy, T, uniforms)
    return energy


def pt_rounds(const long long[::1] indptr, const long long[::1] indices,
              const double[::1] data, signed char[:, ::1] spins, double[::1] energies,
              long long[::1] slots, const double[::1] temps,
              const double[:, :, ::1] flip_u, const double[:, ::1] swap_u,
              long long round0, signed char[::1] best_config,
              double best_energy, long long best_round):
    cdef Py_ssize_t n_rounds = flip_u.shape[0], n_rep = flip_u.shape[1], n = flip_u.shape[2]
    cdef Py_ssize_t r, k, i, row, a, b, parity
    cdef double x
    with nogil:
        for r in range(n_rounds):
            for k in range(n_rep):
                row = slots[k]
                energies[row] = _sweep(indptr, indices, data, spins[row], energies[row],
                                       temps[k], flip_u[r, k])
            for k in range(n_rep):
                row = slots[k]
                if energies[row] < best_energy:
                    best_energy = energies[row]
                    best_round = round0 + r + 1
                    for i in range(n):
                        best_config[i] = spins[row, i]
            parity = (round0 + r) % 2
            k = parity
            while k < n_rep - 1:
                a = slots[k]
                b = slots[k + 1]
                x = (1.0 / temps[k] - 1.0 / temps[k + 1]) * (energies[a] - energies[b])
                if x >= 0.0 or swap_u[r, k] < exp(x):
                    slots[k] = b
                    slots[k + 1] = a
                k += 2
    return best_energy, best_round


def csr_energy(const long long[::1] indptr, const long long[::1] indices,
               const double[::1] data, spins):
    cdef signed char[::1] s = np.ascontiguousarray(spins, dtype=np.int8)
    cdef Py_ssize_t i, n = s.shape[0]
    cdef double total = 0.0
    for i in range(n):
        total += s[i] * _field(indptr, indices, data, s, i)
    return total


cdef inline double _sign_energy(const long long[::1] indptr, const long long[::1] indices,
                                const double[::1] data, double[::1] x, signed char[::1] s) noexcept nogil:
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double total = 0.0
    for i in range(n):
        s[i] = -1 if x[i] < 0 else 1
    for i in range(n):
        total += s[i] * _field(indptr, indices, data, s, i)
    return total


def cac_run(const long long[::1] indptr, const long long[::1] indices,
            const double[::1] data, double[::1] x, double[::1] e,
            const double[:, ::1] gauss, double t0, double best_energy,
            signed char[::1] best_config,
            double alpha, double beta, double gamma, double pump, double dt,
            double mu, double rho, double delta, double noise, double t_c,
            double x_limit):
    cdef Py_ssize_t n = x.shape[0], steps = gauss.shape[0]
    cdef Py_ssize_t k, i
    cdef long long p
    cdef double sq = sqrt(dt)
    cdef double t = t0, a, xi, acc, x_old, x2, e_cur
    cdef long long best_step = 0
    cdef bint diverged = False
    cdef Py_ssize_t done = steps
    h_arr = np.empty(n)
    s_arr = np.empty(n, dtype=np.int8)
    cdef double[::1] h = h_arr
    cdef signed char[::1] s = s_arr
    with nogil:
        e_cur = _sign_energy(indptr, indices, data, x, s)
        for k in range(steps):
            a = alpha + rho * tanh(delta * (e_cur - best_energy))
            xi = gamma * (t - t_c)
            if xi < 0.0:
                xi = 0.0
            for i in range(n):
                acc = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    acc += data[p] * x[indices[p]]
                h[i] = acc
            for i in range(n):
                x_old = x[i]
                x2 = x_old * x_old
                x[i] = x_old + dt * ((pump - 1.0) * x_old - mu * x2 * x_old + beta * e[i] * h[i]) \
                    + noise * sq * gauss[k, i]
                e[i] = e[i] + dt * (-xi * (x2 - a) * e[i])
            t += dt
            for i in range(n):
                if not (isfinite(x[i]) and isfinite(e[i])) or fabs(x[i]) > x_limit:
                    diverged = True
            if diverged:
                done = k + 1
                break
            e_cur = _sign_energy(indptr, indices, data, x, s)
            if e_cur < best_energy:
                best_energy = e_cur
                best_step = k + 1
                for i in range(n):
                    best_config[i] = s[i]
    return best_energy, best_step, done, t, diverged
