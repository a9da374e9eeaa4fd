import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from equitrace.config.run import (
    RunConfig,
    build_system,
    mollifier_spec,
    oracle_test_function,
    period_window,
    seed_spec,
    validate_run_config,
)
from equitrace.exceptions import ValidationError
from equitrace.flow.system import CoverSystem
from equitrace.geometry.group import GroupElt
from equitrace.geometry.quotient import MappingTorusQuotient
from equitrace.models.gallery import QUOTIENT_RUNS, gallery_quotient
from equitrace.oracle.catmap import catmap_fixed_points
from equitrace.oracle.covering import covering_check, quotient_run_pairing
from equitrace.oracle.mollified import mollified_trace
from equitrace.task.base import BaseTask
from equitrace.trace.comb import DeltaComb, assemble, pair, scalar_factorization

log = logging.getLogger(__name__)

DEFAULT_TOLERANCE = {
    "mollified": 1e-2,
    "covering": 1e-6,
    "catmap": 1e-8,
    "scalar": 1e-8,
}


@dataclass
class VerifyTask(BaseTask):
    config: RunConfig
    outdir: Path
    n_jobs: int = 1
    report_name: str = "verify.json"
    report: Dict = field(default_factory=dict)

    @property
    def mode(self) -> str:
        return self.config.oracle.mode

    @property
    def tolerance(self) -> float:
        return self.config.oracle.tolerance or DEFAULT_TOLERANCE[self.mode]

    def comb(self, system: CoverSystem, x: GroupElt) -> DeltaComb:
        return assemble(
            system,
            x,
            period_window(self.config),
            radius=self.config.trace.radius,
            seeds=seed_spec(self.config),
            n_jobs=self.n_jobs,
            threshold=self.config.orbits.det_threshold,
            rng=np.random.default_rng(self.config.seed),
        )

    def fail(self, message: str):
        log.error(message)
        self.report["failures"].append(
            {"error": "VerificationFailed", "message": message}
        )

    def verify_mollified(self, system: CoverSystem, x: GroupElt) -> Dict:
        psi = oracle_test_function(self.config)
        result = mollified_trace(
            system,
            x,
            psi,
            mollifier_spec(self.config),
            radius=self.config.trace.radius,
            n_jobs=self.n_jobs,
        )
        comb_value = pair(self.comb(system, x), psi)
        difference = abs(result.extrapolate - comb_value)
        passed = difference <= self.tolerance * max(1.0, abs(comb_value))
        if not passed:
            self.fail(
                f"Mollified extrapolate {result.extrapolate:.10g} misses the comb pairing"
                f" {comb_value:.10g} by {difference:.3e}"
            )
        return {
            "psi": psi.spec,
            "ladder": result.to_dict(),
            "comb_pairing": comb_value,
            "difference": difference,
            "passed": passed,
        }

    def verify_covering(self, system: CoverSystem, x: GroupElt) -> Dict:
        quotient = gallery_quotient(self.config.model)
        if quotient is None:
            raise ValidationError(
                "model",
                f"no closed-form quotient flow is shipped for {self.config.model!r}",
            )
        psi = oracle_test_function(self.config)
        report = covering_check(
            system,
            quotient,
            psi,
            self.config.oracle.covering_radius,
            seeds=seed_spec(self.config),
            n_jobs=self.n_jobs,
        )
        out = report.to_dict()
        out["psi"] = psi.spec
        passed = report.passed(self.tolerance)
        if self.config.model in QUOTIENT_RUNS:
            run_config = validate_run_config({"model": QUOTIENT_RUNS[self.config.model]})
            value = quotient_run_pairing(
                build_system(run_config), psi, seed_spec(run_config)
            )
            gap = abs(value - report.lhs)
            out["quotient_run"] = {"pairing": value, "difference": gap}
            passed = passed and gap <= self.tolerance
        if not report.exact:
            self.fail(f"Covering sum is not exact at radius {report.radius}")
        elif not passed:
            self.fail(f"Covering identity off by {report.difference:.3e}")
        out["passed"] = passed
        return out

    def verify_catmap(self, system: CoverSystem, x: GroupElt) -> Dict:
        quotient = system.chart.quotient
        if not isinstance(quotient, MappingTorusQuotient):
            raise ValidationError(
                "chart.quotient", "the census check needs a mapping torus"
            )
        matrix = np.rint(quotient.matrix_power(1)).astype(int).tolist()
        comb = self.comb(system, x)
        window = period_window(self.config)
        rows, passed = [], True
        for n in range(1, self.config.oracle.catmap_max_n + 1):
            if not window.contains(n):
                continue
            census = catmap_fixed_points(n, matrix)
            predicted = census.predicted_weight
            found = comb.weight_at(float(n))
            error = abs(found - predicted) / abs(predicted)
            ok = error <= self.tolerance
            passed = passed and ok
            if not ok:
                self.fail(
                    f"Atom at l = {n}: weight {found:.12g}, census {predicted:.12g}"
                )
            rows.append(
                {
                    "census": census.to_dict(),
                    "comb_weight": found,
                    "relative_error": error,
                }
            )
        return {
            "atoms": [a.to_dict() for a in comb.atoms],
            "periods": rows,
            "passed": passed,
        }

    def verify_scalar(self, system: CoverSystem, x: GroupElt) -> Dict:
        comb = self.comb(system, x)
        error = scalar_factorization(
            system,
            comb,
            seeds=seed_spec(self.config),
            n_jobs=self.n_jobs,
            threshold=self.config.orbits.det_threshold,
            rng=np.random.default_rng(self.config.seed),
        )
        scale = max((abs(c.weight) for c in comb.contributions), default=1.0)
        passed = math.isfinite(error) and error <= self.tolerance * max(1.0, scale)
        if not passed:
            self.fail(
                f"Bundle weights differ from scalar weights x fiber trace by {error:.3e}"
            )
        return {
            "max_error": error,
            "fiber_traces": {c.key: c.fiber_trace for c in comb.contributions},
            "passed": passed,
        }

    def execute(self) -> Dict:
        log.info(f"Starting task: verify ({self.mode})")
        start_time = time.time()
        self.report = self.new_report()

        system = self.get_system()
        x = self.get_element(system)
        runner = getattr(self, f"verify_{self.mode}")
        result: Optional[Dict] = runner(system, x)
        self.report.update(mode=self.mode, tolerance=self.tolerance, result=result)
        self.write_report(self.report)

        end_time = time.time()
        log.info("Finished task: verify")
        log.info(f"Total time taken: {(end_time - start_time):.2f} seconds")
        return self.report
