"""Pure-numpy kernels: reference implementations of the hot inner loops.

The numba variants in _kernels_numba.py mirror these signatures exactly.
All matrix arguments are float64, C-contiguous, and symmetric where noted.
"""

import numpy as np


def hinge_loss_value(M, mu, u, y):
    """Margin hinge max(0, 1 - y*(mu - u'Mu))."""
    d2 = u @ M @ u
    return max(0.0, 1.0 - y * (mu - d2))


def prox_nuclear_psd(G, tau):
    """Eigenvalue soft-threshold at tau, negatives clamped to zero."""
    w, V = np.linalg.eigh(G)
    w = np.maximum(w - tau, 0.0)
    P = (V * w) @ V.T
    return 0.5 * (P + P.T)


def prox_l1_psd(G, tau):
    """Entrywise soft-threshold at tau, then eigenvalue clamp onto the PSD cone."""
    S = np.sign(G) * np.maximum(np.abs(G) - tau, 0.0)
    w, V = np.linalg.eigh(S)
    w = np.maximum(w, 0.0)
    P = (V * w) @ V.T
    return 0.5 * (P + P.T)


def comid_update(M, mu, u, y, eta, tau, reg_code):
    """One proximal mirror-descent step under the squared-Frobenius geometry.

    reg_code: 0 = nuclear norm, 1 = elementwise L1.
    Returns (M_new, mu_new, loss_before_step). Subgradient at the hinge kink
    (loss exactly 0) is taken as zero, so the step is a no-op there when
    tau == 0 and a pure prox otherwise.
    """
    d2 = u @ M @ u
    loss = 1.0 - y * (mu - d2)
    if loss <= 0.0:
        loss = 0.0
        if tau == 0.0:
            return M, mu, loss
        G = M
        mu_new = mu
    else:
        G = M - (eta * y) * np.outer(u, u)
        G = 0.5 * (G + G.T)
        mu_new = mu + eta * y
        if mu_new < 1.0:
            mu_new = 1.0
    M_new = prox_nuclear_psd(G, tau) if reg_code == 0 else prox_l1_psd(G, tau)
    return M_new, mu_new, loss


def knn_loo_error(Y, labels, k, n_classes):
    """Leave-one-out k-NN error on embedded points Y (n, d).

    Neighbors ordered by (distance, point index); class ties resolved toward
    the smallest label.
    """
    n = Y.shape[0]
    sq = np.einsum("ij,ij->i", Y, Y)
    D = sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T)
    np.fill_diagonal(D, np.inf)
    order = np.argsort(D, axis=1, kind="stable")[:, :k]
    votes = labels[order]
    counts = np.zeros((n, n_classes), dtype=np.int64)
    rows = np.repeat(np.arange(n), k)
    np.add.at(counts, (rows, votes.ravel()), 1)
    pred = np.argmax(counts, axis=1)
    return float(np.mean(pred != labels))


def lloyd(X, centers, max_iter):
    """Lloyd iterations from the given initial centers until labels stabilize.

    Empty clusters are reseeded at the point currently farthest from its
    assigned center. Returns (labels, centers, inertia).
    """
    n, _ = X.shape
    K = centers.shape[0]
    centers = centers.copy()
    labels = np.full(n, -1, dtype=np.int64)
    xsq = np.einsum("ij,ij->i", X, X)
    for _ in range(max_iter):
        csq = np.einsum("ij,ij->i", centers, centers)
        D = xsq[:, None] + csq[None, :] - 2.0 * (X @ centers.T)
        new_labels = np.argmin(D, axis=1).astype(np.int64)
        dists = D[np.arange(n), new_labels]
        for c in range(K):
            mask = new_labels == c
            if not np.any(mask):
                far = int(np.argmax(dists))
                new_labels[far] = c
                dists[far] = 0.0
                mask = new_labels == c
            centers[c] = X[mask].mean(axis=0)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    csq = np.einsum("ij,ij->i", centers, centers)
    D = xsq[:, None] + csq[None, :] - 2.0 * (X @ centers.T)
    labels = np.argmin(D, axis=1).astype(np.int64)
    inertia = float(np.maximum(D[np.arange(n), labels], 0.0).sum())
    return labels, centers, inertia
