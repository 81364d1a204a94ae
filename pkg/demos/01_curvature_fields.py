#!/usr/bin/env python3
"""Discrete curvature fields on triangle meshes, checked against analytic
surfaces.

A unit sphere has mean curvature 1 and Gaussian curvature 1 everywhere; an
open cylinder of radius 0.5 has principal curvatures (2, 0); a flat grid
has zero everything. The same operators drive the curvature regression
targets of the learning pipeline.
"""

import numpy as np

from handact import curvature as cv
from handact.mesh import build_adjacency, euler_characteristic
from handact.synth import cylinder, hand_template, icosphere, plane_grid


def describe(name, mesh, analytic_h=None, analytic_k=None):
    adj = build_adjacency(mesh)
    interior = ~adj.boundary
    h = cv.mean_curvature(mesh, adj).values
    k = cv.gaussian_curvature(mesh, adj).values
    kmax, kmin = cv.principal_curvatures(mesh, adj)
    print(f"\n{name}: {mesh.n_vertices} vertices, {mesh.n_faces} faces, "
          f"chi={euler_characteristic(mesh)}, boundary={int(adj.boundary.sum())}")
    print(f"  H  in [{h[interior].min():+.3f}, {h[interior].max():+.3f}]"
          + (f"   (analytic {analytic_h})" if analytic_h is not None else ""))
    print(f"  K  in [{k[interior].min():+.3f}, {k[interior].max():+.3f}]"
          + (f"   (analytic {analytic_k})" if analytic_k is not None else ""))
    print(f"  k+ in [{kmax.values[interior].min():+.3f}, {kmax.values[interior].max():+.3f}]"
          f"  k- in [{kmin.values[interior].min():+.3f}, {kmin.values[interior].max():+.3f}]")
    if analytic_h is not None:
        rms = np.sqrt(np.mean((h[interior] - analytic_h) ** 2))
        print(f"  RMS error of H vs analytic: {rms:.2e}")
    defect_total = cv.angle_defects(mesh, adj).sum()
    print(f"  Gauss-Bonnet: sum of angle defects = {defect_total:.12f} "
          f"(2*pi*chi = {2 * np.pi * euler_characteristic(mesh):.12f})")


def main():
    describe("icosphere (3 subdivisions, r=1)", icosphere(3), 1.0, 1.0)
    describe("cylinder (r=0.5, open ends)", cylinder(0.5, 4.0, 48, 33), 1.0, 0.0)
    describe("flat grid", plane_grid(8, 8), 0.0, 0.0)
    describe("deformable hand-blob template", hand_template())

    print("\nConvergence under refinement (sphere, RMS of H vs 1):")
    for level in (1, 2, 3, 4):
        m = icosphere(level)
        adj = build_adjacency(m)
        rms = np.sqrt(np.mean((cv.mean_curvature(m, adj).values - 1.0) ** 2))
        print(f"  subdivision {level}: {rms:.3e}  ({m.n_vertices} vertices)")


if __name__ == "__main__":
    main()
