"""Reads a mesh written by usdf with plyfile and checks its layout.

usage: check_ply.py MESH.ply [--nonempty]
Exits 77 (skipped) when plyfile is not importable.
"""
import math
import sys

try:
    from plyfile import PlyData
except ImportError:
    print("plyfile not available; skipping")
    sys.exit(77)


def main(argv):
    if len(argv) < 2:
        print(__doc__)
        return 1
    ply = PlyData.read(argv[1])
    assert not ply.text and ply.byte_order == "<", "expected binary little endian"
    v = ply["vertex"]
    names = [p.name for p in v.properties]
    assert names == ["x", "y", "z", "uncertainty", "red", "green", "blue"], names
    assert v.data.dtype["uncertainty"].kind == "f" and v.data.dtype["uncertainty"].itemsize == 8
    f = ply["face"]
    n = len(v.data)
    for tri in f.data["vertex_indices"]:
        assert len(tri) == 3, "faces must be triangles"
        assert all(0 <= i < n for i in tri), "face index out of range"
    for s in v.data["uncertainty"]:
        assert math.isfinite(s) and s >= 0.0, "uncertainty must be finite and non-negative"
    if "--nonempty" in argv:
        assert n > 0 and len(f.data) > 0, "mesh is empty"
    print(f"{argv[1]}: {n} vertices, {len(f.data)} faces")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
