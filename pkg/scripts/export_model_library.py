#!/usr/bin/env python3
"""Write every catalog entry, scenario, pattern, and morphism to
model_library/ as JSON, ready for the CLI."""

import argparse
from pathlib import Path

from stockflow import models
from stockflow.io import morphism_spec, save


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=Path(__file__).resolve().parent.parent / "model_library",
        type=Path,
    )
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    written = []
    for name in models.MODELS:
        save(models.build(name), args.out / f"{name}.json")
        written.append(f"{name}.json")
        save(models.reference_scenario(name), args.out / f"{name}_scenario.json")
        written.append(f"{name}_scenario.json")

    save(models.covid_pattern(), args.out / "covid_pattern.json")
    written.append("covid_pattern.json")

    left, right, alpha = models.sird_and_lumped()
    save(morphism_spec(alpha, left, right), args.out / "sird_morphism.json")
    written.append("sird_morphism.json")

    for name in written:
        print(f"wrote {args.out / name}")


if __name__ == "__main__":
    main()
