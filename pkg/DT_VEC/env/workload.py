import math
from dataclasses import dataclass


@dataclass(frozen=True)
class WorkloadPair:
    """
    The twin synchronization payload and the computing task a vehicle produces in one slot.
    Sizes in bytes, processing density in Hz*s per byte (cycles per byte), deadlines in seconds.
    """
    twin_bytes: float
    twin_cycles_per_byte: float
    twin_deadline_s: float
    task_bytes: float
    task_cycles_per_byte: float
    task_deadline_s: float


def sample_workloads(config, rng):
    """
    Draws one WorkloadPair per vehicle; payload sizes are uniform over the configured ranges,
    processing density and deadlines are taken from the configuration.

    Parameters
    ----------
    config: DT_VEC.config.SimConfig
    rng: numpy.random.Generator

    Returns
    -------
    list[WorkloadPair]
    """
    twin = rng.uniform(config.twin_bytes_range[0], config.twin_bytes_range[1], size=config.n_vehicles)
    task = rng.uniform(config.task_bytes_range[0], config.task_bytes_range[1], size=config.n_vehicles)
    return [WorkloadPair(twin_bytes=float(twin[i]),
                         twin_cycles_per_byte=config.cycles_per_byte_hz,
                         twin_deadline_s=config.deadline_s,
                         task_bytes=float(task[i]),
                         task_cycles_per_byte=config.cycles_per_byte_hz,
                         task_deadline_s=config.deadline_s)
            for i in range(config.n_vehicles)]


def _check_positive(rate_bps, f_hz):
    if not rate_bps > 0:
        raise ValueError('uplink rate must be > 0; got {}'.format(rate_bps))
    if not f_hz > 0:
        raise ValueError('CPU frequency must be > 0; got {}'.format(f_hz))


def twin_delay(workload, rate_bps, f_twin_hz, n_vehicles):
    """
    Twin maintenance delay: uplink time of the payload (bytes converted to bits) plus the server compute
    time, which scales with the number of hosted twins.
    """
    _check_positive(rate_bps, f_twin_hz)
    transmission = 8 * workload.twin_bytes / rate_bps
    compute = workload.twin_bytes * workload.twin_cycles_per_byte / f_twin_hz * n_vehicles
    return transmission + compute


def task_delay(workload, rate_bps, f_task_hz):
    """Task processing delay: uplink time of the task plus the server compute time."""
    _check_positive(rate_bps, f_task_hz)
    transmission = 8 * workload.task_bytes / rate_bps
    compute = workload.task_bytes * workload.task_cycles_per_byte / f_task_hz
    return transmission + compute


def satisfaction(delay_s, deadline_s):
    """Q = 1 - ln(1 + delay/deadline); 1 for zero delay, negative beyond (e-1) deadlines."""
    if not deadline_s > 0:
        raise ValueError('deadline must be > 0; got {}'.format(deadline_s))
    if delay_s < 0:
        raise ValueError('delay must be >= 0; got {}'.format(delay_s))
    return 1 - math.log1p(delay_s / deadline_s)


def utility(q_twin, q_task, rho):
    """Resource utility U = rho * Q_twin + (1 - rho) * Q_task."""
    if not 0 < rho < 1:
        raise ValueError('weight rho must lie in (0, 1); got {}'.format(rho))
    return rho * q_twin + (1 - rho) * q_task
