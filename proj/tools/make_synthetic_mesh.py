#!/usr/bin/env python3
"""Generate the synthetic tokamak mesh fixture (Gmsh 2.2 ASCII).

The geometry is a semicircle of radius R in the (r, z) half plane. Region
tags are assigned per triangle from the centroid: five central solenoid
modules, six poloidal field coils, an elliptical limiter region and vacuum.
Points are distributed with a force-based smoother (distmesh style) driven
by a graded size function, then snapped exactly onto the arc and the axis.

Usage: make_synthetic_mesh.py OUT.msh [--hfine 0.32] [--seed 7]
"""

import argparse
import math

import numpy as np
from scipy.spatial import Delaunay

R = 13.0

# (name, physical id, r centre, z centre, width, height)
COILS = [
    ("CS1", 11, 1.70, 4.40, 0.80, 2.00),
    ("CS2", 12, 1.70, 2.20, 0.80, 2.00),
    ("CS3", 13, 1.70, 0.00, 0.80, 2.00),
    ("CS4", 14, 1.70, -2.20, 0.80, 2.00),
    ("CS5", 15, 1.70, -4.40, 0.80, 2.00),
    ("PF1", 16, 3.94, 7.60, 0.96, 0.98),
    ("PF2", 17, 8.30, 6.60, 0.60, 0.70),
    ("PF3", 18, 11.30, 3.20, 0.70, 0.90),
    ("PF4", 19, 11.30, -2.20, 0.70, 0.90),
    ("PF5", 20, 8.30, -6.70, 0.80, 0.80),
    ("PF6", 21, 4.30, -7.60, 1.60, 0.98),
]

LIMITER = (6.3, 0.0, 3.2, 5.6)  # centre r, centre z, semi-axis r, semi-axis z
VACUUM_ID = 1
LIMITER_ID = 2
ARC_ID = 100
AXIS_ID = 101


def limiter_level(p):
    rc, zc, ar, az = LIMITER
    return ((p[:, 0] - rc) / ar) ** 2 + ((p[:, 1] - zc) / az) ** 2


def box_distance(p, rc, zc, w, h):
    dx = np.maximum(np.abs(p[:, 0] - rc) - w / 2, 0.0)
    dz = np.maximum(np.abs(p[:, 1] - zc) - h / 2, 0.0)
    return np.hypot(dx, dz)


def size_function(p, hfine):
    lim = np.sqrt(limiter_level(p))
    d_lim = np.maximum(lim - 1.0, 0.0) * 3.2
    d = d_lim
    hcoil = 0.7 * hfine
    h = hfine + 0.18 * d
    for _, _, rc, zc, w, hh in COILS:
        dc = box_distance(p, rc, zc, w, hh)
        h = np.minimum(h, hcoil + 0.18 * dc)
    return np.minimum(h, 4.0 * hfine)


def signed_distance(p):
    d_circle = np.hypot(p[:, 0], p[:, 1]) - R
    d_axis = -p[:, 0]
    return np.maximum(d_circle, d_axis)


def distmesh(hfine, seed, iters=400):
    rng = np.random.default_rng(seed)
    h0 = 0.7 * hfine
    xs = np.arange(0.0, R + h0, h0)
    zs = np.arange(-R, R + h0, h0 * math.sqrt(3) / 2)
    gx, gz = np.meshgrid(xs, zs)
    gx[1::2, :] += h0 / 2
    p = np.column_stack([gx.ravel(), gz.ravel()])
    p = p[signed_distance(p) < -1e-3 * h0]
    hs = size_function(p, hfine)
    keep = rng.random(len(p)) < (h0 / hs) ** 2
    p = p[keep]

    fixed = [(0.0, R), (0.0, -R)]
    fixed = np.array(fixed)
    p = np.vstack([fixed, p])
    nfix = len(fixed)

    dptol, ttol, Fscale, deltat = 1e-4, 0.1, 1.2, 0.2
    geps = 1e-3 * hfine
    pold = np.full_like(p, np.inf)
    for it in range(iters):
        if np.max(np.hypot(*(p - pold).T)) / h0 > ttol:
            pold = p.copy()
            tri = Delaunay(p).simplices
            cent = p[tri].mean(axis=1)
            tri = tri[signed_distance(cent) < -geps]
            bars = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [0, 2]]])
            bars = np.unique(np.sort(bars, axis=1), axis=0)
        barvec = p[bars[:, 0]] - p[bars[:, 1]]
        L = np.hypot(barvec[:, 0], barvec[:, 1])
        hbars = size_function((p[bars[:, 0]] + p[bars[:, 1]]) / 2, hfine)
        L0 = hbars * Fscale * math.sqrt(np.sum(L**2) / np.sum(hbars**2))
        F = np.maximum(L0 - L, 0.0)
        Fvec = (F / L)[:, None] * barvec
        Ftot = np.zeros_like(p)
        np.add.at(Ftot, bars[:, 0], Fvec)
        np.add.at(Ftot, bars[:, 1], -Fvec)
        Ftot[:nfix] = 0.0
        p = p + deltat * Ftot
        d = signed_distance(p)
        ix = d > 0
        if np.any(ix):
            # project back onto the nearest boundary piece
            q = p[ix]
            dc = np.hypot(q[:, 0], q[:, 1]) - R
            da = -q[:, 0]
            on_circle = dc >= da
            qc = q[on_circle]
            qc *= (R / np.hypot(qc[:, 0], qc[:, 1]))[:, None]
            q[on_circle] = qc
            q[~on_circle, 0] = 0.0
            q[:, 0] = np.maximum(q[:, 0], 0.0)
            p[ix] = q
        moved = np.hypot(*(deltat * Ftot[d < -geps]).T)
        if len(moved) and np.max(moved) / h0 < dptol:
            break

    # snap: points near the arc go exactly onto the circle, points near the
    # axis go exactly onto r = 0
    rr = np.hypot(p[:, 0], p[:, 1])
    near_arc = np.abs(rr - R) < 0.05 * hfine
    p[near_arc] *= (R / rr[near_arc])[:, None]
    near_axis = p[:, 0] < 0.05 * hfine
    p[near_axis, 0] = 0.0
    # remove interior points that crowd the boundary
    tri = Delaunay(p).simplices
    cent = p[tri].mean(axis=1)
    tri = tri[signed_distance(cent) < -geps]
    return p, tri


def orient(p, tri):
    a, b, c = p[tri[:, 0]], p[tri[:, 1]], p[tri[:, 2]]
    area = 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))
    flip = area < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    return tri, np.abs(area)


def tag_elements(p, tri):
    cent = p[tri].mean(axis=1)
    tags = np.full(len(tri), VACUUM_ID)
    tags[limiter_level(cent) <= 1.0] = LIMITER_ID
    for _, pid, rc, zc, w, h in COILS:
        inside = (np.abs(cent[:, 0] - rc) <= w / 2) & (np.abs(cent[:, 1] - zc) <= h / 2)
        tags[inside] = pid
    return tags


def boundary_edges(tri):
    edges = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    return uniq[counts == 1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--hfine", type=float, default=0.32)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--manifest", default=None)
    args = ap.parse_args()

    p, tri = distmesh(args.hfine, args.seed)
    # drop unused points and renumber
    used = np.unique(tri)
    remap = -np.ones(len(p), dtype=int)
    remap[used] = np.arange(len(used))
    p = p[used]
    tri = remap[tri]
    tri, area = orient(p, tri)
    assert np.min(area) > 1e-6, "degenerate triangle"
    tags = tag_elements(p, tri)

    bnd = boundary_edges(tri)
    rr = np.hypot(p[:, 0], p[:, 1])
    on_arc = np.abs(rr**2 - R**2) <= 1e-8 * R**2
    arc_edges = bnd[on_arc[bnd[:, 0]] & on_arc[bnd[:, 1]]]
    axis_edges = bnd[(p[bnd[:, 0], 0] == 0.0) & (p[bnd[:, 1], 0] == 0.0)]

    with open(args.out, "w") as f:
        f.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        f.write("$PhysicalNames\n%d\n" % (2 + 2 + len(COILS)))
        f.write('1 %d "farfield"\n1 %d "axis"\n' % (ARC_ID, AXIS_ID))
        f.write('2 %d "vacuum"\n2 %d "limiter"\n' % (VACUUM_ID, LIMITER_ID))
        for name, pid, *_ in COILS:
            f.write('2 %d "%s"\n' % (pid, name))
        f.write("$EndPhysicalNames\n")
        f.write("$Nodes\n%d\n" % len(p))
        for i, (r, z) in enumerate(p):
            f.write("%d %.17g %.17g 0\n" % (i + 1, r, z))
        f.write("$EndNodes\n")
        nel = len(arc_edges) + len(axis_edges) + len(tri)
        f.write("$Elements\n%d\n" % nel)
        k = 1
        for a, b in arc_edges:
            f.write("%d 1 2 %d %d %d %d\n" % (k, ARC_ID, ARC_ID, a + 1, b + 1))
            k += 1
        for a, b in axis_edges:
            f.write("%d 1 2 %d %d %d %d\n" % (k, AXIS_ID, AXIS_ID, a + 1, b + 1))
            k += 1
        for t, tag in zip(tri, tags):
            f.write("%d 2 2 %d %d %d %d %d\n" % (k, tag, tag, t[0] + 1, t[1] + 1, t[2] + 1))
            k += 1
        f.write("$EndElements\n")

    if args.manifest:
        with open(args.manifest, "w") as f:
            f.write("vertices %d\n" % len(p))
            f.write("triangles %d\n" % len(tri))
            f.write("farfield_edges %d\n" % len(arc_edges))
            f.write("axis_edges %d\n" % len(axis_edges))
            for name, pid, *_ in COILS:
                f.write("coil_%s_triangles %d\n" % (name, int(np.sum(tags == pid))))
            f.write("limiter_triangles %d\n" % int(np.sum(tags == LIMITER_ID)))
    q = quality(p, tri)
    print("vertices", len(p), "triangles", len(tri), "arc edges", len(arc_edges),
          "min quality %.3f" % q.min(), "min coil elems",
          min(int(np.sum(tags == c[1])) for c in COILS))


def quality(p, tri):
    a, b, c = p[tri[:, 0]], p[tri[:, 1]], p[tri[:, 2]]
    la = np.hypot(*(b - c).T)
    lb = np.hypot(*(a - c).T)
    lc = np.hypot(*(a - b).T)
    s = (la + lb + lc) / 2
    area = np.sqrt(np.maximum(s * (s - la) * (s - lb) * (s - lc), 0))
    return 4 * math.sqrt(3) * area / (la**2 + lb**2 + lc**2)


if __name__ == "__main__":
    main()
