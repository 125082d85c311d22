import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import pandas as pd
from simple_parsing.helpers import field

from ..panel import save_csv
from ..run import Run
from ..utils import colorize, format_points, to_builtin
from .scenarios import GeneratedDataset, ScenarioSpec, generate


def truth_record(data: GeneratedDataset) -> dict[str, Any]:
    """Contents of the truth sidecar written next to a simulated panel."""
    return to_builtin(
        dict(
            spec=data.spec.to_dict(),
            idio_scale=data.idio_scale,
            breaks=[b._asdict() for b in data.truth],
        )
    )


@dataclass
class Simulate(Run):
    """Simulate a panel from one of the built-in scenarios."""

    spec: ScenarioSpec = field(default_factory=ScenarioSpec)

    save_components: bool = False
    """Also write the true common and idiosyncratic components."""

    def apply(self, out_dir: Path) -> None:
        data = generate(self.spec)
        save_csv(data.panel, out_dir / "panel.csv")

        with open(out_dir / "truth.json", "w") as f:
            json.dump(truth_record(data), f, indent=2)
            f.write("\n")

        if self.save_components:
            for name, values in (
                ("common", data.true_common),
                ("idiosyncratic", data.idio_scale * data.true_idio),
            ):
                df = pd.DataFrame(values.numpy())
                df.to_csv(out_dir / f"{name}.csv", index=False, header=False)

        for origin in ("common", "idiosyncratic"):
            points = format_points(data.breaks(origin))
            print(f"{colorize(origin, 'cyan')} breaks: {points}")
