import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict

from equitrace.config.run import RunConfig, period_window, seed_spec
from equitrace.orbits.poincare import annotate
from equitrace.orbits.search import find_orbits, refinement_stable
from equitrace.task.base import BaseTask
from equitrace.util.report import write_csv

log = logging.getLogger(__name__)

BASE_COLUMNS = ["x_payload", "l"]
TAIL_COLUMNS = ["kind", "T_sharp", "T_gamma", "det_one_minus_P", "residual"]


@dataclass
class OrbitsTask(BaseTask):
    config: RunConfig
    outdir: Path
    n_jobs: int = 1
    report_name: str = "orbits.json"
    report: Dict = field(default_factory=dict)

    def execute(self) -> Dict:
        log.info("Starting task: orbits")
        start_time = time.time()
        self.report = self.new_report()

        system = self.get_system()
        x = self.get_element(system)
        window = period_window(self.config)
        seeds = seed_spec(self.config)
        log.debug(f"Searching ({x}, l)-curves for l in {window.to_list()}")

        self.report["hypotheses"] = self.hypotheses(system)
        orbits = find_orbits(system, x, window, seeds, self.n_jobs)
        orbits = annotate(system, orbits, self.config.orbits.det_threshold)
        if self.config.orbits.check_refinement:
            stable = refinement_stable(system, x, window, seeds, orbits, self.n_jobs)
            self.report["refinement_stable"] = stable
            if not stable:
                log.warning("A doubled seed grid finds a different period multiset")

        columns = (
            BASE_COLUMNS + [f"m0_{i + 1}" for i in range(system.chart.dim)] + TAIL_COLUMNS
        )
        rows = [o.to_record() for o in orbits]
        write_csv(rows, columns, Path(self.outdir, "orbits.csv"))
        self.report.update(
            g=str(x),
            window=window.to_list(),
            orbit_count=len(orbits),
            degenerate=[o.ident for o in orbits if not o.poincare.nondegenerate],
        )
        self.write_report(self.report)

        end_time = time.time()
        log.info("Finished task: orbits")
        log.info(f"Total time taken: {(end_time - start_time):.2f} seconds")
        return self.report
