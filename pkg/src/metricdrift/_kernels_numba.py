"""Numba-jitted kernels. Same surface as _kernels_numpy; see backend module."""

import numpy as np
from numba import njit


@njit(cache=True)
def hinge_loss_value(M, mu, u, y):
    d2 = u @ M @ u
    v = 1.0 - y * (mu - d2)
    return v if v > 0.0 else 0.0


@njit(cache=True)
def prox_nuclear_psd(G, tau):
    w, V = np.linalg.eigh(G)
    w = np.maximum(w - tau, 0.0)
    P = (V * w) @ V.T
    return 0.5 * (P + P.T)


@njit(cache=True)
def prox_l1_psd(G, tau):
    S = np.sign(G) * np.maximum(np.abs(G) - tau, 0.0)
    w, V = np.linalg.eigh(S)
    w = np.maximum(w, 0.0)
    P = (V * w) @ V.T
    return 0.5 * (P + P.T)


@njit(cache=True)
def comid_update(M, mu, u, y, eta, tau, reg_code):
    d2 = u @ M @ u
    loss = 1.0 - y * (mu - d2)
    if loss <= 0.0:
        loss = 0.0
        if tau == 0.0:
            # copy keeps return types uniform (inputs may be readonly views)
            return M.copy(), mu, loss
        G = M.copy()
        mu_new = mu
    else:
        G = M - (eta * y) * np.outer(u, u)
        G = 0.5 * (G + G.T)
        mu_new = mu + eta * y
        if mu_new < 1.0:
            mu_new = 1.0
    M_new = prox_nuclear_psd(G, tau) if reg_code == 0 else prox_l1_psd(G, tau)
    return M_new, mu_new, loss


@njit(cache=True)
def knn_loo_error(Y, labels, k, n_classes):
    n, d = Y.shape
    errors = 0
    nd = np.empty(k)
    ni = np.empty(k, dtype=np.int64)
    counts = np.empty(n_classes, dtype=np.int64)
    for i in range(n):
        filled = 0
        for j in range(n):
            if j == i:
                continue
            dist = 0.0
            for c in range(d):
                diff = Y[i, c] - Y[j, c]
                dist += diff * diff
            # insertion keyed by (dist, index); j arrives in index order, so
            # equal distances keep the smaller index first
            if filled < k:
                pos = filled
                while pos > 0 and nd[pos - 1] > dist:
                    nd[pos] = nd[pos - 1]
                    ni[pos] = ni[pos - 1]
                    pos -= 1
                nd[pos] = dist
                ni[pos] = j
                filled += 1
            elif dist < nd[k - 1]:
                pos = k - 1
                while pos > 0 and nd[pos - 1] > dist:
                    nd[pos] = nd[pos - 1]
                    ni[pos] = ni[pos - 1]
                    pos -= 1
                nd[pos] = dist
                ni[pos] = j
        counts[:] = 0
        for m in range(filled):
            counts[labels[ni[m]]] += 1
        best = 0
        for c in range(1, n_classes):
            if counts[c] > counts[best]:
                best = c
        if best != labels[i]:
            errors += 1
    return errors / n


@njit(cache=True)
def lloyd(X, centers, max_iter):
    n, d = X.shape
    K = centers.shape[0]
    centers = centers.copy()
    labels = np.full(n, -1, dtype=np.int64)
    new_labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n)
    sums = np.empty((K, d))
    sizes = np.empty(K, dtype=np.int64)
    for _ in range(max_iter):
        for i in range(n):
            best = 0
            best_d = np.inf
            for c in range(K):
                dist = 0.0
                for j in range(d):
                    diff = X[i, j] - centers[c, j]
                    dist += diff * diff
                if dist < best_d:
                    best_d = dist
                    best = c
            new_labels[i] = best
            dists[i] = best_d
        sums[:] = 0.0
        sizes[:] = 0
        for i in range(n):
            sizes[new_labels[i]] += 1
            for j in range(d):
                sums[new_labels[i], j] += X[i, j]
        for c in range(K):
            if sizes[c] == 0:
                far = 0
                far_d = dists[0]
                for i in range(1, n):
                    if dists[i] > far_d:
                        far_d = dists[i]
                        far = i
                old = new_labels[far]
                sizes[old] -= 1
                for j in range(d):
                    sums[old, j] -= X[far, j]
                new_labels[far] = c
                dists[far] = 0.0
                sizes[c] = 1
                for j in range(d):
                    sums[c, j] = X[far, j]
            for j in range(d):
                centers[c, j] = sums[c, j] / sizes[c]
        stable = True
        for i in range(n):
            if new_labels[i] != labels[i]:
                stable = False
            labels[i] = new_labels[i]
        if stable:
            break
    inertia = 0.0
    for i in range(n):
        best = 0
        best_d = np.inf
        for c in range(K):
            dist = 0.0
            for j in range(d):
                diff = X[i, j] - centers[c, j]
                dist += diff * diff
            if dist < best_d:
                best_d = dist
                best = c
        labels[i] = best
        inertia += best_d
    return labels, centers, inertia
