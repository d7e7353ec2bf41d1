import datetime
import glob
import logging
import os
import sys
from typing import get_args

from data_models import (
    BenchConfig,
    FitReport,
    Formula,
    OracleResult,
    ScalingRecord,
    SolveReport,
    VerifyConfig,
    VerifySummary,
)

ValidDataModel = (
    Formula
    | SolveReport
    | OracleResult
    | ScalingRecord
    | FitReport
    | BenchConfig
    | VerifyConfig
    | VerifySummary
)

type ValidDataModelType = (
    type[Formula]
    | type[SolveReport]
    | type[OracleResult]
    | type[ScalingRecord]
    | type[FitReport]
    | type[BenchConfig]
    | type[VerifyConfig]
    | type[VerifySummary]
)

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def find_config_file(configs_dir: str, pattern: str) -> str:
    matches = sorted(glob.glob(f"{configs_dir}/{pattern}"))
    if not matches:
        raise FileNotFoundError(
            f"No config file matching pattern {pattern!r} in {configs_dir}"
        )
    return matches[0]


def serialize_data_model(output_path: str, data_model: ValidDataModel) -> None:
    valid_data_models = get_args(ValidDataModel)

    if type(data_model) in valid_data_models:
        json_output = data_model.model_dump_json(indent=2)
        with open(output_path, "w", encoding="utf-8") as f:
            f.write(json_output)
    else:
        raise ValueError(
            f"Invalid data model type: {type(data_model).__name__}. "
            f"Must be one of: {[cls.__name__ for cls in valid_data_models]}"
        )


def deserialize_data_model(
    input_path: str, data_model_type: ValidDataModelType
) -> ValidDataModel:
    valid_data_model_types = get_args(ValidDataModel)

    if data_model_type in valid_data_model_types:
        with open(input_path, "r", encoding="utf-8") as f:
            json_data = f.read()
        return data_model_type.model_validate_json(json_data)
    else:
        raise ValueError(
            f"Invalid data model type: {data_model_type.__name__}. "
            f"Must be one of: {[cls.__name__ for cls in valid_data_model_types]}"
        )


def read_input(path: str) -> tuple[bytes, str]:
    """Raw bytes of a file, or of stdin when path is '-', with a display name."""
    if path == "-":
        return sys.stdin.buffer.read(), "<stdin>"
    with open(path, "rb") as f:
        return f.read(), path


def list_corpus(corpus_dir: str) -> list[str]:
    if not os.path.isdir(corpus_dir):
        raise FileNotFoundError(f"Corpus directory not found: {corpus_dir}")
    return sorted(glob.glob(os.path.join(corpus_dir, "*.cnf")))


def generate_bench_output_path(config_name: str, mode: str, out_dir: str = "bench_results") -> str:
    timestamp = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
    safe_name = config_name.replace(" ", "_")
    return f"{out_dir}/{safe_name}_{mode}_{timestamp}.csv"


def env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    try:
        return int(value, 0)
    except ValueError as e:
        raise ValueError(f"Environment variable {name}={value!r} is not an integer") from e


def configure_logging(level: str | None = None) -> None:
    level = (level or os.getenv("MASKSAT_LOG_LEVEL") or "WARNING").upper()
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)
