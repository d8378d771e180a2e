"""
CUMI Toolkit — Configuration
All defaults loaded from environment variables (or a local .env file).
"""

import os

from dotenv import load_dotenv

load_dotenv()

# ============================================================================
# THREADING — must be applied before numpy is imported anywhere
# ============================================================================
CUMI_THREADS = int(os.getenv("CUMI_THREADS", "1"))  # 1 keeps runs bit-reproducible

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, str(CUMI_THREADS))

# ============================================================================
# ESTIMATORS — matrix-based Renyi entropy
# ============================================================================
ALPHA = float(os.getenv("CUMI_ALPHA", "1.01"))
BANDWIDTH = os.getenv("CUMI_BANDWIDTH", "median")  # "median" or a positive float
EIG_SOLVER = os.getenv("CUMI_EIG_SOLVER", "lapack")  # "lapack" or "jacobi"
EIG_CLAMP = 1e-12
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

# ============================================================================
# TRAINING — objective weights and SGD
# ============================================================================
BETA = float(os.getenv("CUMI_BETA", "0.01"))
GAMMA = float(os.getenv("CUMI_GAMMA", "0.01"))
LEARNING_RATE = float(os.getenv("CUMI_LR", "0.01"))
EPOCHS = int(os.getenv("CUMI_EPOCHS", "100"))
BATCH_SIZE = int(os.getenv("CUMI_BATCH_SIZE", "100"))
SEED = int(os.getenv("CUMI_SEED", "0"))
DIAG_SAMPLE_CAP = int(os.getenv("CUMI_DIAG_SAMPLE_CAP", "512"))

# ============================================================================
# DATA — splitting
# ============================================================================
TEST_FRACTION = float(os.getenv("CUMI_TEST_FRACTION", "0.2"))
CSV_DELIMITER = os.getenv("CUMI_CSV_DELIMITER", ",")

# ============================================================================
# SYNTHETIC BENCHMARK
# ============================================================================
SYNTH_SAMPLES = int(os.getenv("CUMI_SYNTH_SAMPLES", "100"))
SYNTH_EPOCHS = int(os.getenv("CUMI_SYNTH_EPOCHS", "100"))
SYNTH_BATCH_SIZE = int(os.getenv("CUMI_SYNTH_BATCH_SIZE", "20"))
SYNTH_LR = float(os.getenv("CUMI_SYNTH_LR", "0.05"))
SYNTH_BETA = float(os.getenv("CUMI_SYNTH_BETA", "0.01"))
SYNTH_GAMMA = float(os.getenv("CUMI_SYNTH_GAMMA", "0.3"))
SYNTH_BANDWIDTH = os.getenv("CUMI_SYNTH_BANDWIDTH", "1.0")  # "median" or a positive float

# ============================================================================
# SWEEP — grid defaults (sensitivity range)
# ============================================================================
SWEEP_GRID = [1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.5, 1.0]
STRUCTURE_GRID = [5, 50, 100, 200, 300, 500]  # common / unique latent widths

# ============================================================================
# OUTPUT & LOGGING
# ============================================================================
OUTPUT_DIR = os.getenv("CUMI_OUTPUT_DIR", "runs")
LOG_LEVEL = os.getenv("CUMI_LOG_LEVEL", "INFO")
LOG_FORMAT = os.getenv("CUMI_LOG_FORMAT", "text")  # "text" or "json"

VERSION = "1.0.0"
