"""Run the bundled fixture config end to end: one query, then an extraction experiment."""

import argparse
import json
from pathlib import Path

from dualgen.config import load_config
from dualgen.dataset import STANDARD_TEMPLATE
from dualgen.pipeline import Pipeline, table_row

CONFIG = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "config.toml"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(CONFIG))
    ap.add_argument("--prompt", default="Please recommend me viewpoints near St. Regis Lhasa")
    args = ap.parse_args()

    pipe = Pipeline(load_config(args.config))
    resp = pipe.run_query(args.prompt)
    print(resp.to_json())
    print("timing (ms):", {k: round(v, 3) for k, v in resp.timing_ms.items()})

    test_set = [(STANDARD_TEMPLATE.format(name=h.name), h.name) for h in pipe.hotels]
    run = pipe.run_experiment(test_set, "extraction")
    print(json.dumps(table_row(run, "fixture-table", "mock"), indent=2))


if __name__ == "__main__":
    main()
