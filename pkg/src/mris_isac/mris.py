"""Movable reflecting surface geometry.

A fixed M_r x M_c surface of always-on elements hosts a smaller movable
N_r x N_c panel that slides over it. Each placement b covers a contiguous
sub-block; covered elements take their phase from the movable panel, the
rest from the fixed surface. Elements are indexed row-major: element
(m_r, m_c) sits at flat position m_r * M_c + m_c (zero based).

With N = 0 the movable panel is absent and the surface degenerates to a
single static placement.
"""

from __future__ import annotations

import numpy as np


def num_placements(M_r, M_c, N_r, N_c):
    """Placement-grid shape (B_r, B_c) and total count B."""
    if N_r == 0 and N_c == 0:
        return 1, 1, 1
    B_r = M_r - N_r + 1
    B_c = M_c - N_c + 1
    if B_r < 1 or B_c < 1:
        raise ValueError("movable panel does not fit on the fixed surface")
    return B_r, B_c, B_r * B_c


def placement_offset(b, M_r, M_c, N_r, N_c):
    """Top-left corner (r, c) of placement b on the fixed grid."""
    B_r, B_c, B = num_placements(M_r, M_c, N_r, N_c)
    if not 0 <= b < B:
        raise ValueError(f"placement index {b} out of range [0, {B})")
    return b // B_c, b % B_c


def placement_matrices(b, M_r, M_c, N_r, N_c):
    """Selection matrix E_b (M x N) and fixed-element indicator e_b (M,).

    E_b[m, n] = 1 when fixed element m is covered by movable element n at
    placement b; e_b marks the uncovered elements. Every fixed element is
    either covered by exactly one movable element or uncovered, so
    E_b @ 1_N + e_b = 1_M.
    """
    M = M_r * M_c
    N = N_r * N_c
    E = np.zeros((M, N))
    e = np.ones(M)
    if N == 0:
        return E, e
    r0, c0 = placement_offset(b, M_r, M_c, N_r, N_c)
    for n_r in range(N_r):
        for n_c in range(N_c):
            m = (r0 + n_r) * M_c + (c0 + n_c)
            n = n_r * N_c + n_c
            E[m, n] = 1.0
            e[m] = 0.0
    return E, e


def all_placements(M_r, M_c, N_r, N_c):
    """List of (E_b, e_b) for every placement, in index order."""
    _, _, B = num_placements(M_r, M_c, N_r, N_c)
    return [placement_matrices(b, M_r, M_c, N_r, N_c) for b in range(B)]


def effective_phase(E_b, e_b, phi):
    """Surface phase profile at one placement.

    Covered elements reflect with the movable-panel phases phi, uncovered
    ones with unit phase (the fixed surface acts as a plain mirror there).
    """
    phi = np.asarray(phi)
    if phi.size == 0:
        return e_b.astype(complex)
    return E_b @ phi + e_b


def composite_phase(phi_bar, theta):
    """Joint per-element coefficient: placement profile times tunable phase."""
    return np.asarray(phi_bar) * np.asarray(theta)


def random_phases(n, rng):
    """Unit-modulus vector with uniform random phases."""
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=n))
