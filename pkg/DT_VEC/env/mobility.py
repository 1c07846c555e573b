from dataclasses import dataclass, replace
import numpy as np


@dataclass(frozen=True)
class VehicleState:
    """
    Kinematic and channel state of one vehicle. The vehicle moves along the x axis of a coordinate system
    centered at the base station; z is always 0.

    Attributes
    ----------
    id: int
        Vehicle index.
    lane_j: int
        Lane index in [0, J-1].
    x_m: float
        Position along the road in meters.
    y_m: float
        Lateral offset from the base station; always `first_lane_offset_m + lane_j * lane_width_m`.
    speed_mps: float
        Constant driving speed in m/s.
    h_complex: complex
        Small-scale fading state.
    gain: float
        Channel gain |h|^2 * large-scale fading.
    """
    id: int
    lane_j: int
    x_m: float
    y_m: float
    speed_mps: float
    h_complex: complex = 1 + 0j
    gain: float = 1.0

    @property
    def position(self):
        return self.x_m, self.y_m, 0.0


def lane_offset(config, lane_j):
    """Lateral coordinate of lane `lane_j`."""
    return config.first_lane_offset_m + lane_j * config.lane_width_m


def init_scenario(config, seed):
    """
    Places `n_vehicles` vehicles on the road segment [-road_half_len_m, +road_half_len_m].

    Candidate positions are drawn from a homogeneous Poisson process of intensity `vehicle_density_per_m`;
    the point count is redrawn until at least N points exist and the N points closest to the base station
    are kept, ordered by position. Lanes and speeds are drawn uniformly.

    Parameters
    ----------
    config: DT_VEC.config.SimConfig
        The scenario configuration.
    seed: int
        Seed of the placement; identical seeds give identical vehicle lists.

    Returns
    -------
    list[VehicleState]
    """
    if config.n_vehicles < 1:
        raise ValueError("Parameter 'n_vehicles': expected a value >= 1; got '{}' instead".format(config.n_vehicles))
    mean_count = 2 * config.road_half_len_m * config.vehicle_density_per_m
    if not mean_count > 0:
        raise ValueError('the road segment holds no vehicles on average (density {} / m, half length {} m)'
                         .format(config.vehicle_density_per_m, config.road_half_len_m))
    rng = np.random.default_rng(seed)
    count = rng.poisson(mean_count)
    while count < config.n_vehicles:
        count = rng.poisson(mean_count)
    x = rng.uniform(-config.road_half_len_m, config.road_half_len_m, size=count)
    x = np.sort(x[np.argsort(np.abs(x), kind='stable')[:config.n_vehicles]])
    lanes = rng.integers(0, config.n_lanes, size=config.n_vehicles)
    speeds = rng.uniform(config.speed_range_mps[0], config.speed_range_mps[1], size=config.n_vehicles)

    vehicles = []
    for i in range(config.n_vehicles):
        lane = int(lanes[i])
        vehicles.append(VehicleState(id=i, lane_j=lane, x_m=float(x[i]), y_m=lane_offset(config, lane),
                                     speed_mps=float(speeds[i]), h_complex=1 + 0j, gain=1.0))
    return vehicles


def advance_position(vehicle, slot_s):
    """
    Moves a vehicle forward by one slot: x' = x + slot_s * speed. Lane and y are unchanged.

    Parameters
    ----------
    vehicle: VehicleState
    slot_s: float
        Slot duration in seconds; must be positive.

    Returns
    -------
    VehicleState
    """
    if not slot_s > 0:
        raise ValueError('slot duration must be > 0; got {}'.format(slot_s))
    return replace(vehicle, x_m=vehicle.x_m + slot_s * vehicle.speed_mps)
