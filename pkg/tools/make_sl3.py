"""Regenerate src/spencerkit/data/sl3.json from 3x3 matrix commutators."""

from pathlib import Path

from spencerkit.liealg import check_structure, dump_algebra, sl3_from_matrices

alg = sl3_from_matrices()
assert check_structure(alg).ok
out = Path(__file__).resolve().parents[1] / "src" / "spencerkit" / "data" / "sl3.json"
out.write_text(dump_algebra(alg))
print(f"wrote {out}")
