"""
Reading ARFF files and caching datasets
=======================================
"""

# %%
import tempfile
from pathlib import Path

from it2mlc import parse_arff, stats
from it2mlc.data import load_cache, save_cache
from it2mlc.errors import ParseError

text = """@relation 'toy: -C -2'
@attribute x0 numeric
@attribute x1 numeric
@attribute x2 numeric
@attribute l0 {0,1}
@attribute l1 {0,1}
@data
0.5,1,2,1,0
{0 1, 4 1}
"""
tmp = Path(tempfile.mkdtemp())
(tmp / "toy.arff").write_text(text)
ds = parse_arff(tmp / "toy.arff")
print(ds.X, ds.Y, sep="\n")
print(stats(ds))

# %%
# Bad label values are reported with their line.
(tmp / "bad.arff").write_text(text.replace("2,1,0", "2,3,0"))
try:
    parse_arff(tmp / "bad.arff")
except ParseError as e:
    print(e)

# %%
save_cache(ds, tmp / "toy.bin")
back = load_cache(tmp / "toy.bin")
print((back.X == ds.X).all(), (back.Y == ds.Y).all())
