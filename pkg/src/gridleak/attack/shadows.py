"""Shadow-model farm: one forecaster per auxiliary household."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from ..data.records import Dataset
from ..errors import DivergenceError
from ..forecast.model import ForecastHyperparams, save_forecaster, train_forecaster

log = logging.getLogger(__name__)

SHADOW_ROLE = 5
HONEST_ROLE = 6


def derive_seed(*parts: int) -> int:
    """Stable child seed from integer parts (worker-count independent)."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _train_one(rec, hp: ForecastHyperparams, child_seed: int, out_dir: str,
               train_days: int | None):
    try:
        model, mae = train_forecaster(rec.tail_days(train_days), hp, seed=child_seed)
    except DivergenceError as exc:
        log.warning("meter %d dropped from the farm: %s", rec.meter_id, exc)
        return rec.meter_id, None, None
    save_forecaster(model, Path(out_dir) / str(rec.meter_id))
    return rec.meter_id, str(Path(out_dir) / str(rec.meter_id)), mae


def train_shadow_farm(aux: Dataset, hp: ForecastHyperparams, seed: int,
                      out_dir, workers: int = 1, train_days: int | None = None,
                      role: int = SHADOW_ROLE) -> dict[int, str]:
    """Train and persist one forecaster per household in ``aux``.

    Per-meter seeds derive from (seed, role, meter_id), so results do not
    depend on worker count or household order. Divergent meters are
    dropped with a warning; everything else lands in ``out_dir`` as
    ``<meter_id>.sglk`` + ``<meter_id>.json``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(rec, hp, derive_seed(seed, role, rec.meter_id))
            for rec, _ in aux.households]
    if workers <= 1:
        results = [_train_one(rec, h, s, str(out_dir), train_days) for rec, h, s in jobs]
    else:
        results = Parallel(n_jobs=workers, inner_max_num_threads=1)(
            delayed(_train_one)(rec, h, s, str(out_dir), train_days)
            for rec, h, s in jobs)
    paths = {meter: path for meter, path, _ in results if path is not None}
    maes = [mae for _, path, mae in results if path is not None]
    log.info("farm trained %d/%d models (mean test MAE %.4f)",
             len(paths), len(jobs), float(np.mean(maes)) if maes else float("nan"))
    return paths
