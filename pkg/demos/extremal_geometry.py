"""Extremal points of the (2,2,2) quantum set that accumulate at a vertex.

Prints the family of extremal points as the entanglement angle shrinks,
then certifies the three-dimensional hull example.

Run: python3 demos/extremal_geometry.py
"""

from bellperturb.geometry222 import extremal_sequence, hull_demo

print("theta     distance  extremality residual")
for theta in (0.4, 0.2, 0.1, 0.05, 0.02):
    pt = extremal_sequence(theta)
    print(f"{theta:<8g}  {pt.distance:.5f}   {pt.extremality.max_residual:.1e}")

rep = hull_demo(8)
print(f"\nhull with 8 points and the origin: {len(rep.certificates)} certificates, ok={rep.ok}")
for c in rep.certificates:
    print(f"  {c.point}: margin {c.margin:.2e}")
