"""Shipped example systems.

Each entry is a raw configuration mapping that a run config can name under `model` and
then override section by section. Where the compact quotient has a closed form the entry
also carries it, for the covering and census checks.
"""

import copy
from typing import Dict, List, Optional

from equitrace.exceptions import ValidationError
from equitrace.oracle.catmap import CAT_MATRIX
from equitrace.oracle.covering import CircleFlow, QuotientFlow, SuspensionFlow

SUSPENSION_AMPLITUDE = 0.1

ROTATION_FLOW = [
    "-y + x*(1 - x**2 - y**2)",
    "x + y*(1 - x**2 - y**2)",
    "(1 - x**2 - y**2) - z*(x**2 + y**2)",
]
QUARTER_TURN = [[0, -1, 0], [1, 0, 0], [0, 0, 1]]
# quarter turns of the (x, y) and (v, w) planes together, and w -> -w
DOUBLE_QUARTER_TURN = [
    [0, -1, 0, 0, 0],
    [1, 0, 0, 0, 0],
    [0, 0, 1, 0, 0],
    [0, 0, 0, 0, -1],
    [0, 0, 0, 1, 0],
]
W_REFLECTION = [
    [1, 0, 0, 0, 0],
    [0, 1, 0, 0, 0],
    [0, 0, 1, 0, 0],
    [0, 0, 0, 1, 0],
    [0, 0, 0, 0, -1],
]

MODELS: Dict[str, Dict] = {
    "translation-line": {
        "chart": {"dim": 1, "coordinates": ["x"], "sample_box": [[-1.0, 1.0]]},
        "group": {
            "kind": "translation-line",
            "direction": [1.0],
            "window": {"center": [0.0], "radius": 0.5},
        },
        "flow": {"u": ["1"]},
        "orbits": {"allow_both_signs": True, "l_eps": 0.1, "l_window": [-2.0, 2.0]},
        "trace": {
            "g": "0.7",
            "psi": [
                "gaussian:center=0.7,width=0.05",
                "gaussian:center=0.75,width=0.1",
                "gaussian:center=0.6,width=0.08",
            ],
            "curve": {
                "template": "gaussian:center={c},width=0.05",
                "start": 0.45,
                "stop": 1.0,
            },
        },
        "oracle": {"mode": "mollified", "psi": "bump:center=0.7,radius=0.5"},
    },
    "circle": {
        "chart": {"dim": 1, "coordinates": ["x"], "sample_box": [[0.0, 1.0]]},
        "group": {
            "kind": "free-abelian",
            "generators": [{"matrix": [[1.0]], "shift": [1.0]}],
            "window": {"center": [0.5], "radius": 0.75},
        },
        "flow": {"u": ["1"]},
        "orbits": {"l_window": [0.5, 3.5]},
        "trace": {"g": "1", "psi": ["bump:center=2,radius=1.4"]},
        "oracle": {
            "mode": "covering",
            "psi": "bump:center=2,radius=1.4",
            "covering_radius": 4,
        },
    },
    "circle-quotient": {
        "chart": {
            "dim": 1,
            "coordinates": ["x"],
            "sample_box": [[0.0, 1.0]],
            "quotient": {"kind": "lattice", "periods": [1.0]},
        },
        "flow": {"u": ["1"]},
        "orbits": {"l_window": [0.5, 3.5]},
        "trace": {"g": "e", "psi": ["bump:center=2,radius=1.4"]},
        "oracle": {"mode": "mollified", "psi": "bump:center=1,radius=0.4"},
    },
    "suspension": {
        "chart": {
            "dim": 2,
            "coordinates": ["x", "s"],
            "sample_box": [[0.0, 1.0], [0.0, 1.0]],
        },
        "group": {
            "kind": "free-abelian",
            "generators": [
                {"matrix": [[1.0, 0.0], [0.0, 1.0]], "shift": [1.0, 0.0]},
                {
                    "map": "circle-lift",
                    "amplitude": SUSPENSION_AMPLITUDE,
                    "power": -1,
                    "axis": 0,
                    "shift": [0.0, 1.0],
                },
            ],
            "window": {"center": [0.5, 0.5], "radius": 0.75},
        },
        "flow": {"u": ["0", "1"]},
        "orbits": {"l_window": [0.5, 3.5]},
        "trace": {"g": "0,1", "psi": ["bump:center=2,radius=1.4"]},
        "oracle": {
            "mode": "covering",
            "psi": "bump:center=2,radius=1.4",
            "covering_radius": 6,
        },
    },
    "catmap": {
        "chart": {
            "dim": 3,
            "coordinates": ["v1", "v2", "s"],
            "sample_box": [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]],
            "quotient": {
                "kind": "mapping-torus",
                "matrix": [list(r) for r in CAT_MATRIX],
            },
        },
        "flow": {"u": ["0", "0", "1"]},
        "orbits": {"l_window": [0.5, 3.5], "seed_points": 512, "seed_tolerance": 1.0},
        "trace": {
            "g": "e",
            "psi": ["bump:center=1,radius=0.4", "bump:center=2,radius=0.4"],
        },
        "oracle": {
            "mode": "catmap",
            "catmap_max_n": 3,
            "psi": "bump:center=1,radius=0.4",
        },
    },
    "finite-rotation": {
        "chart": {
            "dim": 3,
            "coordinates": ["x", "y", "z"],
            "sample_box": [[-1.6, 1.6], [-1.6, 1.6], [-0.6, 0.6]],
        },
        "group": {"kind": "finite", "generators": [{"matrix": QUARTER_TURN}]},
        "flow": {"u": ROTATION_FLOW},
        "orbits": {"l_window": [0.5, 7.0]},
        "trace": {"g": "1", "psi": ["bump:center=1.5707963267948966,radius=0.5"]},
        "oracle": {
            "mode": "mollified",
            "psi": "bump:center=1.5707963267948966,radius=0.5",
        },
    },
    "dihedral-rotation": {
        "chart": {
            "dim": 5,
            "coordinates": ["x", "y", "z", "v", "w"],
            "sample_box": [
                [-1.6, 1.6],
                [-1.6, 1.6],
                [-0.6, 0.6],
                [-0.5, 0.5],
                [-0.5, 0.5],
            ],
        },
        "group": {
            "kind": "finite",
            "generators": [{"matrix": DOUBLE_QUARTER_TURN}, {"matrix": W_REFLECTION}],
        },
        "flow": {"u": ROTATION_FLOW + ["-v", "-w"]},
        "orbits": {"l_window": [0.5, 7.0], "seed_points": 200},
        "trace": {"g": "1", "psi": ["bump:center=1.5707963267948966,radius=0.5"]},
        "oracle": {"mode": "scalar"},
    },
    "rank2-bundle": {
        "chart": {
            "dim": 3,
            "coordinates": ["x", "y", "z"],
            "sample_box": [[-1.6, 1.6], [-1.6, 1.6], [-0.6, 0.6]],
        },
        "group": {"kind": "finite", "generators": [{"matrix": QUARTER_TURN}]},
        "flow": {"u": ROTATION_FLOW},
        "bundle": {
            "rank": 2,
            "generator": [["-(x**2+y**2)/2", "-0.3"], ["0.3", "-(x**2+y**2)/2"]],
            "endomorphism": [["2", "-0.5"], ["0.5", "2"]],
            "fiber_action": [[["0", "-1"], ["1", "0"]]],
        },
        "orbits": {"l_window": [0.5, 7.0]},
        "trace": {"g": "1", "psi": ["bump:center=1.5707963267948966,radius=0.5"]},
        "oracle": {"mode": "scalar"},
    },
    "degenerate-shear": {
        "chart": {
            "dim": 2,
            "coordinates": ["x", "y"],
            "sample_box": [[0.0, 1.0], [0.0, 1.0]],
        },
        "group": {
            "kind": "free-abelian",
            "generators": [
                {"matrix": [[1.0, 0.0], [0.0, 1.0]], "shift": [1.0, 0.0]},
                {"matrix": [[1.0, 0.0], [0.0, 1.0]], "shift": [0.0, 1.0]},
            ],
            "window": {"center": [0.5, 0.5], "radius": 0.75},
        },
        "flow": {"u": ["0", "1 + 0.1*sin(2*pi*x)"]},
        "orbits": {"l_window": [0.5, 1.5]},
        "trace": {"g": "0,1", "psi": ["bump:center=1,radius=0.4"]},
    },
    "broken-rho": {
        "chart": {"dim": 1, "coordinates": ["x"], "sample_box": [[0.0, 1.0]]},
        "group": {
            "kind": "free-abelian",
            "generators": [{"matrix": [[1.0]], "shift": [1.0]}],
            "window": {"center": [0.5], "radius": 0.75},
        },
        "flow": {"u": ["1"]},
        "bundle": {"rank": 1, "fiber_action": [[["exp(x)"]]]},
        "orbits": {"l_window": [0.5, 3.5]},
        "trace": {"g": "1", "psi": ["bump:center=2,radius=1.4"]},
    },
}

QUOTIENTS: Dict[str, QuotientFlow] = {
    "circle": CircleFlow(1.0),
    "circle-quotient": CircleFlow(1.0),
    "suspension": SuspensionFlow(SUSPENSION_AMPLITUDE),
}

QUOTIENT_RUNS = {"circle": "circle-quotient"}


def model_names() -> List[str]:
    return sorted(MODELS)


def gallery_config(name: str) -> Dict:
    if name not in MODELS:
        raise ValidationError(
            "model", f"unknown model {name!r}, expected one of {model_names()}"
        )
    return copy.deepcopy(MODELS[name])


def gallery_quotient(name: Optional[str]) -> Optional[QuotientFlow]:
    return QUOTIENTS.get(name or "")
