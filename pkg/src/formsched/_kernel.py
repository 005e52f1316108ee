"""Compiled inner loop advancing a batch of episodes between slot boundaries.

Pure integration only: localization resets, scheduling and loss recording
happen outside at slot boundaries. Arithmetic mirrors the reference
implementations in dynamics, estimator and controller; a regression test
keeps the two paths aligned.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def advance_window(p, phat, q, sigma, noise, row_episode, step0, dt, n_steps,
                   horizon, kp, kf, ke, edge_i, edge_j, edge_w, dist_sq,
                   node_w, nbr_idx, nbr_w, nbr_cnt, vmask):
    """Advance all batch rows by ``n_steps`` Euler steps of length ``dt``.

    Shapes: p, phat (R, n, d); q (R, n, n, d); sigma (n,); noise
    (n_episodes, n_steps, n, d) indexed through row_episode (R,); edge_i,
    edge_j (R, E); edge_w, dist_sq (E,); node_w (R, n); nbr_idx, nbr_w
    (R, n, maxdeg); nbr_cnt (R, n); vmask (R, n, n). Mutates p, phat, q.
    """
    R, n, d = p.shape
    E = edge_i.shape[1]
    sqdt = np.sqrt(dt)
    v = np.empty((n, d))
    dq = np.empty((n, n, d))
    for r in range(R):
        ep = row_episode[r]
        for s in range(n_steps):
            t = (step0 + s) * dt
            ref0 = t
            ref2 = 5.0 - 5.0 * np.tanh(t - horizon / 2.0)
            # tracking term from each agent's local centroid estimate
            for i in range(n):
                m0 = 0.0
                m1 = 0.0
                m2 = 0.0
                for j in range(n):
                    m0 += q[r, i, j, 0]
                    m1 += q[r, i, j, 1]
                    m2 += q[r, i, j, 2]
                c = -kp * node_w[r, i]
                v[i, 0] = c * (m0 / n - ref0)
                v[i, 1] = c * (m1 / n - 0.0)
                v[i, 2] = c * (m2 / n - ref2)
            # formation term accumulated per edge
            for k in range(E):
                i = edge_i[r, k]
                j = edge_j[r, k]
                u0 = phat[r, i, 0] - phat[r, j, 0]
                u1 = phat[r, i, 1] - phat[r, j, 1]
                u2 = phat[r, i, 2] - phat[r, j, 2]
                cf = -kf * edge_w[k] * ((u0 * u0 + u1 * u1 + u2 * u2) - dist_sq[k])
                v[i, 0] += cf * u0
                v[i, 1] += cf * u1
                v[i, 2] += cf * u2
                v[j, 0] -= cf * u0
                v[j, 1] -= cf * u1
                v[j, 2] -= cf * u2
            # estimator rates from the pre-step snapshot
            for i in range(n):
                for j in range(n):
                    a0 = 0.0
                    a1 = 0.0
                    a2 = 0.0
                    for c_ in range(nbr_cnt[r, i]):
                        l = nbr_idx[r, i, c_]
                        w = nbr_w[r, i, c_]
                        a0 += w * (q[r, i, j, 0] - q[r, l, j, 0])
                        a1 += w * (q[r, i, j, 1] - q[r, l, j, 1])
                        a2 += w * (q[r, i, j, 2] - q[r, l, j, 2])
                    vm = vmask[r, i, j]
                    dq[i, j, 0] = -ke * a0 + vm * v[j, 0]
                    dq[i, j, 1] = -ke * a1 + vm * v[j, 1]
                    dq[i, j, 2] = -ke * a2 + vm * v[j, 2]
                dq[i, i, 0] -= ke * node_w[r, i] * (q[r, i, i, 0] - phat[r, i, 0])
                dq[i, i, 1] -= ke * node_w[r, i] * (q[r, i, i, 1] - phat[r, i, 1])
                dq[i, i, 2] -= ke * node_w[r, i] * (q[r, i, i, 2] - phat[r, i, 2])
            for i in range(n):
                for j in range(n):
                    q[r, i, j, 0] += dt * dq[i, j, 0]
                    q[r, i, j, 1] += dt * dq[i, j, 1]
                    q[r, i, j, 2] += dt * dq[i, j, 2]
            for i in range(n):
                sg = sigma[i] * sqdt
                p[r, i, 0] += v[i, 0] * dt + sg * noise[ep, s, i, 0]
                p[r, i, 1] += v[i, 1] * dt + sg * noise[ep, s, i, 1]
                p[r, i, 2] += v[i, 2] * dt + sg * noise[ep, s, i, 2]
                phat[r, i, 0] += v[i, 0] * dt
                phat[r, i, 1] += v[i, 1] * dt
                phat[r, i, 2] += v[i, 2] * dt
