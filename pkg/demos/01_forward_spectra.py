"""Forward spectra on the disk and the half-cylinder, checked against the ODE oracle.

The disk conductivity is constant on the outer annulus and affine inside the
interface radius; the cylinder has two constant layers.  For both, the
closed-form multipliers are compared with an independent numerical solve of
the radial (or axial) mode equation.

    python demos/01_forward_spectra.py
"""

import numpy as np

from dtn_lab import (
    CylinderConductivity,
    DiskConductivity,
    compute_zeros,
    cylinder_spectrum,
    disk_spectrum,
    oracle_cylinder_multiplier,
    oracle_disk_spectrum,
)

disk = DiskConductivity(alpha0=2.0, alpha1=1.0, alpha2=3.0, a=0.5)
modes = np.arange(1, 9)
closed = disk_spectrum(disk, 8).multipliers
oracle = oracle_disk_spectrum(modes, disk)

print("disk", disk)
print(f"{'n':>3} {'C_n closed':>20} {'C_n oracle':>20} {'rel err':>10}")
for n, c, o in zip(modes, closed, oracle):
    print(f"{n:3d} {c:20.15f} {o:20.15f} {abs(c - o) / c:10.2e}")
# the interior is invisible to high modes: C_n -> alpha0 like a^(2n)
print("C_n - alpha0 :", np.array2string(closed - disk.alpha0, precision=3))

cyl = CylinderConductivity(alpha1=2.0, alpha2=0.5, h=0.4)
zeros = compute_zeros(8)
spec = cylinder_spectrum(cyl, 8, zeros)
print("\ncylinder", cyl)
print(f"{'n':>3} {'lambda_n':>10} {'A_n closed':>20} {'A_n oracle':>20}")
for n in range(1, 9):
    o = oracle_cylinder_multiplier(n, cyl, zeros, rtol=1e-9)
    print(f"{n:3d} {zeros[n]:10.5f} {spec[n]:20.15f} {o:20.15f}")
print("limit 1 + alpha2 =", 1 + cyl.alpha2)
