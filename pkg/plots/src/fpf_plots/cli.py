"""fpf-plots --spec spec.json

The spec file maps figure ids to inputs and outputs:

    {"figures": [
        {"figure": "poc-rate", "inputs": ["out/poc.csv"], "output": "poc.png"},
        {"figure": "gain-overlay", "inputs": ["out/gain.csv"], "output": "gain.png"}
    ]}

Exit codes: 0 success, 2 on schema mismatch or unreadable spec (the column
diff is printed on standard error).
"""

from __future__ import annotations

import argparse
import json
import sys

from .render import FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fpf-plots",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--spec", required=True, help="JSON figure spec")
    args = parser.parse_args(argv)
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        figures = doc["figures"] if isinstance(doc, dict) else doc
        for item in figures:
            spec = FigureSpec(figure=item["figure"],
                              inputs=tuple(item["inputs"]),
                              output=item["output"])
            meta = render(spec)
            print(json.dumps(meta))
        return 0
    except (OSError, json.JSONDecodeError, KeyError, SchemaError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
