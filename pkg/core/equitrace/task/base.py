from abc import ABCMeta, abstractmethod
from pathlib import Path
from typing import Dict

import numpy as np

from equitrace.config.run import RunConfig, build_system
from equitrace.exceptions import EquitraceNotImplementedError
from equitrace.flow.system import CoverSystem, check_hypotheses
from equitrace.geometry.group import GroupElt
from equitrace.util.report import write_json


class BaseTask(metaclass=ABCMeta):
    config: RunConfig
    outdir: Path
    report_name: str

    def get_system(self) -> CoverSystem:
        return build_system(self.config)

    def get_element(self, system: CoverSystem) -> GroupElt:
        return system.group.parse(self.config.trace.g)

    def hypotheses(self, system: CoverSystem) -> Dict:
        return check_hypotheses(system, rng=np.random.default_rng(self.config.seed))

    def new_report(self) -> Dict:
        return {
            "resolved_config": self.config.model_dump(mode="json"),
            "failures": [],
        }

    def write_report(self, report: Dict) -> Path:
        return write_json(report, Path(self.outdir, self.report_name))

    @abstractmethod
    def execute(self) -> Dict:
        raise EquitraceNotImplementedError(
            "This method needs to be implemented in child class"
        )
