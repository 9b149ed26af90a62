#!/usr/bin/env python3
"""
Competing-risk estimator entrypoint.

    python main.py sample     draw a type-II censored sample from B(eta0, eta1, beta)
    python main.py fit-mle    EM fit of a sample CSV
    python main.py fit-bayes  MH posterior and loss-based estimates
    python main.py study      mle | bayes | compare simulation studies
    python main.py curves     survival and hazard tables for parameter triples

Arguments are passed through unchanged to competing-risk-estimator/runner.py;
the exit code is the runner's (0 ok, 1 usage/input, 2 numerical failure).
"""
from __future__ import annotations

import sys
from pathlib import Path
from typing import List, Optional

APP_DIR = Path(__file__).resolve().parent / "competing-risk-estimator"


def main(argv: Optional[List[str]] = None) -> int:
    if not (APP_DIR / "runner.py").exists():
        print(f"Estimator package not found: {APP_DIR}", file=sys.stderr)
        return 1

    # model, mle, bayes, sim and storage import as top-level modules.
    sys.path.insert(0, str(APP_DIR))
    import runner

    return runner.main(argv)


if __name__ == "__main__":
    raise SystemExit(main())
