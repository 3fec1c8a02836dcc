import math
import os
from pathlib import Path

from dotenv import load_dotenv

from src.utils.logger import setup_logger

load_dotenv()

LOGGER = setup_logger("opfgap", level=os.getenv("OPFGAP_LOG_LEVEL", "INFO"))

REPO_ROOT = Path(__file__).resolve().parent.parent

# --- Logging envs ---
OPFGAP_LOG = os.getenv("OPFGAP_LOG", "info").strip().lower()

# --- Case / output envs ---
CASES_DIR = Path(os.getenv("OPFGAP_CASES_DIR", str(REPO_ROOT / "data" / "cases")))
OUT_DIR = Path(os.getenv("OPFGAP_OUT_DIR", "results"))
DEFAULT_ANGLE_MAX = math.radians(float(os.getenv("OPFGAP_DEFAULT_ANGLE_MAX_DEG", "60")))

# --- Solver envs ---
KKT_TOLERANCE = float(os.getenv("OPFGAP_KKT_TOL", "1e-8"))
MAX_ITERATIONS = int(os.getenv("OPFGAP_MAX_ITERS", "500"))
TIME_LIMIT_S = float(os.getenv("OPFGAP_TIME_LIMIT_S", "600"))

# --- Sweep envs ---
WORKERS = int(os.getenv("OPFGAP_WORKERS", "1"))
GAP_THRESHOLD = float(os.getenv("OPFGAP_GAP_THRESHOLD", "1.0"))
VMAG_EPS = float(os.getenv("OPFGAP_VMAG_EPS", "1e-4"))
FLOW_EPS = float(os.getenv("OPFGAP_FLOW_EPS", "1e-3"))
MAX_SWEEP_POINTS = int(os.getenv("OPFGAP_MAX_SWEEP_POINTS", "10000"))

# Scenario defaults; the CLI reads these too so both surfaces agree.
DEFAULT_BASE_STEP = 0.02
DEFAULT_REFINE_STEP = 0.005
DEFAULT_REFINE_TRIGGER = 2.0
DEFAULT_GEN_CAPACITY_FACTOR = 1.0

# Default fuel-typed costs in per-unit: (c2, c1, c0).
FUEL_DEFAULT_COSTS: dict[str, tuple[float, float, float]] = {
    "thermal": (0.11, 5.0, 0.0),
    "nuclear": (0.02, 1.0, 0.0),
    "hydro": (0.0, 0.5, 0.0),
    "wind": (0.0, 0.3, 0.0),
    "solar": (0.0, 0.2, 0.0),
}
