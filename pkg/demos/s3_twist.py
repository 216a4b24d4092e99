"""Twist and dual surface of the constant three-sphere family on a torus.

Prints energies before and after, the kernel-line degree, and the same
numbers for a copy moved by a smooth spatial gauge (where the kernel line
has nonzero curvature pointwise but still degree 0).
"""
import numpy as np

from lambdalab import (Domain, GaugeFamily, constant_solution, dual_surface, energy,
                       family_from_uq, gauge_apply, kernel_splitting, line_degree,
                       random_sl2_field, twist)


def report(fam, name):
    split = kernel_splitting(fam.coefficient(-1).part("10"))
    E = energy(fam).energy.real
    deg = line_degree(fam, split)
    Et = energy(twist(fam, split)).energy.real
    Ed = energy(dual_surface(fam, split)).energy.real
    print(f"{name}:  E = {E:.12f}  deg L = {deg:+.2e}")
    print(f"    twist: {Et:.12f}  (2E - deg L = {2 * E - deg:.12f})")
    print(f"    dual:  {Ed:.12f}  (E - deg L  = {E - deg:.12f})")


def main():
    dom = Domain.torus(64)
    fam = family_from_uq(constant_solution(dom, 1.0, "S3"))
    print(f"expected E = 1/pi = {1 / np.pi:.12f}")
    report(fam, "constant")
    g0 = GaugeFamily.constant(dom, random_sl2_field(dom, 11, amplitude=0.1))
    report(gauge_apply(fam, g0).replace(higgs_type=True), "gauged")


if __name__ == "__main__":
    main()
