import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    THREADS = int(os.environ.get("FRACNS_THREADS", os.cpu_count() or 1))
    FFT_WORKERS = int(os.environ.get("FRACNS_FFT_WORKERS", 1))

    # largest |tau| accepted by the dilation operators
    TAU_MAX = float(os.environ.get("FRACNS_TAU_MAX", 3.0))

    OUTPUT_DIR = os.environ.get("FRACNS_OUTPUT_DIR", "runs")
    OUTPUT_DIR = os.path.abspath(OUTPUT_DIR)

    # the CLI --debug flag lowers the root logger to DEBUG regardless
    LOG_LEVEL = os.environ.get("FRACNS_LOG_LEVEL", "INFO").upper()
