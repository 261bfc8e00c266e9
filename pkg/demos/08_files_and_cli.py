"""
Output files and the command line
=================================

Every command reads a YAML configuration and writes CSV tables, a text
summary and binary PDIF snapshots.  The same runs can be driven from Python
through ``polydiff.cli.main``.
"""

# %%
import tempfile
from pathlib import Path

from polydiff.cli import main
from polydiff.io import read_csv, read_header, read_snapshot

root = Path(__file__).resolve().parents[1]
out = Path(tempfile.mkdtemp()) / "run"
code = main(["simulate", "--config", str(root / "configs" / "uptake.yaml"), "--out", str(out)])
print("exit code", code)
print(sorted(p.name for p in out.iterdir()))

# %%
# The energy table is CRLF-terminated CSV with round-trip float precision.
header, rows = read_csv(out / "energy.csv")
print(header)
print(rows[-1])

# %%
# Snapshots carry a small binary header and a plain-text sidecar.
u = read_snapshot(out / "u_final.pdif")
print("u_final", u.shape, u.min(), u.max())
print(read_header(out / "u_final.pdif"))
