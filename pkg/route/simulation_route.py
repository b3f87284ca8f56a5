from typing import Literal, Optional

from fastapi import APIRouter, HTTPException
from pydantic import ValidationError

from mimo.errors import ConfigError, GeometryError
from model import PatternPoint, PatternRequest, ScenarioConfig
from scenario import pattern_rows, run_monte_carlo

simulation_router = APIRouter(prefix="/simulation", tags=["Simulation"])


@simulation_router.post("/run")
def run_scenario(config: ScenarioConfig, trials: Optional[int] = None, seed: Optional[int] = None):
    """
    This API endpoint runs a Monte-Carlo scenario and returns every per-trial record.

    Args:
        config (ScenarioConfig): The scenario (expected data format as per the ScenarioConfig model).
        trials (int, optional): Overrides the scenario's trial count.
        seed (int, optional): Overrides the scenario's master seed.

    Returns:
        dict: A dictionary containing:
            * count (int): The number of records.
            * records (list): MetricsRecords ordered by sweep value, trial and pair.

    Raises:
        HTTPException: 422 when the scenario cannot be built, 500 for any other failure.
    """
    try:
        records = run_monte_carlo(config, trials=trials, seed=seed)
        return {"count": len(records), "records": [record.model_dump() for record in records]}
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@simulation_router.post("/pattern")
def array_pattern(
    request: PatternRequest,
    cut: Literal["azimuth", "elevation"] = "azimuth",
    samples: int = 361,
):
    """
    This API endpoint samples the gain of a ULA or UPA along one angle.

    Args:
        request (PatternRequest): Array kind, dimensions, orientation and optional weights.
        cut (str, optional): "azimuth" or "elevation" (defaults to azimuth).
        samples (int, optional): Grid points including both endpoints (defaults to 361).

    Returns:
        dict: The cut name and a list of points (angle, gain_real, gain_imag, magnitude_db).

    Raises:
        HTTPException: 422 for an invalid weight vector or sample count, 500 otherwise.
    """
    try:
        array = request.build()
        if request.weights_real is not None:
            imag = request.weights_imag or [0.0] * len(request.weights_real)
            if len(imag) != len(request.weights_real):
                raise ConfigError("weights_real and weights_imag must have the same length")
            array = array.set_weights([complex(re, im) for re, im in zip(request.weights_real, imag)])
        if samples < 2:
            raise ConfigError(f"A pattern cut needs at least 2 samples, got {samples}")
        points = [PatternPoint(**row) for row in pattern_rows(array.pattern_cut(cut, samples))]
        return {"cut": cut, "points": [point.model_dump() for point in points]}
    except (ConfigError, GeometryError, ValidationError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
