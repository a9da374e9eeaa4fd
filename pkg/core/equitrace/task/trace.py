import logging
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from equitrace.config.run import (
    RunConfig,
    curve_centers,
    pairing_functions,
    period_window,
    seed_spec,
)
from equitrace.task.base import BaseTask
from equitrace.trace.comb import assemble, pair
from equitrace.trace.testfn import parse_test_function
from equitrace.util.report import write_csv

log = logging.getLogger(__name__)


@dataclass
class TraceTask(BaseTask):
    config: RunConfig
    outdir: Path
    n_jobs: int = 1
    report_name: str = "trace.json"
    report: Dict = field(default_factory=dict)

    def pairing_curve(self, comb) -> List[Dict]:
        template = self.config.trace.curve.template
        rows = []
        for c in curve_centers(self.config):
            psi = parse_test_function(template.format(c=f"{c:.12g}"))
            rows.append({"c": c, "value": pair(comb, psi)})
        return rows

    def execute(self) -> Dict:
        log.info("Starting task: trace")
        start_time = time.time()
        self.report = self.new_report()

        system = self.get_system()
        x = self.get_element(system)
        window = period_window(self.config)
        self.report["hypotheses"] = self.hypotheses(system)

        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            comb = assemble(
                system,
                x,
                window,
                radius=self.config.trace.radius,
                seeds=seed_spec(self.config),
                n_jobs=self.n_jobs,
                threshold=self.config.orbits.det_threshold,
                rng=np.random.default_rng(self.config.seed),
            )
            pairings = [
                {"psi": spec, "value": pair(comb, psi)}
                for spec, psi in pairing_functions(self.config)
            ]
            curve = self.pairing_curve(comb) if self.config.trace.curve else []

        messages: List[Tuple[str, str]] = []
        for w in caught:
            text = (w.category.__name__, str(w.message))
            if text not in messages:
                messages.append(text)
                log.warning(f"{text[0]}: {text[1]}")

        self.report.update(comb.to_dict())
        self.report["pairings"] = pairings
        self.report["diagnostics"]["warnings"] = [f"{c}: {m}" for c, m in messages]
        self.report["diagnostics"]["fiber_traces"] = {
            c.key: c.fiber_trace for c in comb.contributions
        }
        if curve:
            write_csv(curve, ["c", "value"], Path(self.outdir, "pairing-curve.csv"))
        self.write_report(self.report)

        for p in pairings:
            log.info(f"<Tr_g, {p['psi']}> = {p['value']:.12g}")
        end_time = time.time()
        log.info("Finished task: trace")
        log.info(f"Total time taken: {(end_time - start_time):.2f} seconds")
        return self.report
