"""Write every catalog graph to graphs/<name>.json."""

from pathlib import Path

from lvlingam import catalog
from lvlingam.graph import dag_to_json, dumps_graph

out = Path(__file__).resolve().parent.parent / "graphs"
out.mkdir(exist_ok=True)
for name in catalog.GRAPHS:
    (out / f"{name}.json").write_text(dumps_graph(dag_to_json(catalog.get(name))))
    print(out / f"{name}.json")
