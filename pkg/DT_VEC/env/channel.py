import math
import numpy as np


def distance(vehicle_pos, bs_pos):
    """Euclidean distance between two 3-D positions in meters."""
    return math.dist(vehicle_pos, bs_pos)


def update_small_scale(h_prev, vehicle_pos, bs_pos, kappa, beta, rng=None):
    """
    First-order Gauss-Markov update of the small-scale fading state:
    h' = kappa * h_prev + d^(-beta), d being the vehicle to base station distance.

    Parameters
    ----------
    h_prev: complex
        Fading state of the previous slot.
    vehicle_pos: tuple[float]
        (x, y, z) of the vehicle in meters.
    bs_pos: tuple[float]
        (x, y, z) of the base station antenna in meters.
    kappa: float
        Correlation coefficient.
    beta: float
        Path loss exponent.
    rng: numpy.random.Generator, optional
        If given, a circularly-symmetric complex Gaussian innovation of variance 1 - kappa^2 is added.

    Returns
    -------
    complex
    """
    d = distance(vehicle_pos, bs_pos)
    if d == 0:
        raise ValueError('vehicle and base station positions coincide; the distance term is singular')
    h = kappa * complex(h_prev) + d ** (-beta)
    if rng is not None:
        std = math.sqrt((1 - kappa ** 2) / 2)
        h += complex(rng.normal(0, std), rng.normal(0, std))
    return h


def large_scale_fading(mode, sigma_db=None, rng=None):
    """
    Large-scale fading factor v. Mode 'unit' returns 1 because the fading update already carries the
    distance decay; mode 'log-normal-shadowing' draws 10^(X/10) with X ~ N(0, sigma_db).
    """
    if mode == 'unit':
        return 1.0
    elif mode == 'log-normal-shadowing':
        return float(10 ** (rng.normal(0, sigma_db) / 10))
    else:
        raise ValueError("large-scale fading mode '{}' is not supported".format(mode))


def channel_gain(h, large_scale):
    """Channel gain g = |h|^2 * v."""
    if large_scale < 0:
        raise ValueError('large-scale fading must be >= 0; got {}'.format(large_scale))
    return abs(h) ** 2 * large_scale


def reference_gain(config, d_ref=100.0):
    """Stationary gain (unit large-scale fading, no innovation) of a vehicle at distance `d_ref`."""
    return (d_ref ** (-config.pathloss_exp) / (1 - config.corr_coeff)) ** 2


def uplink_rate(bandwidth_hz, power_mw, gain, noise_mw):
    """
    Shannon uplink rate r = W * log2(1 + p*g/sigma^2) in bit/s.

    Parameters
    ----------
    bandwidth_hz: float
    power_mw: float
    gain: float
    noise_mw: float

    Returns
    -------
    float
    """
    if not (bandwidth_hz > 0 and noise_mw > 0):
        raise ValueError('bandwidth and noise power must be > 0')
    if power_mw < 0 or gain < 0:
        raise ValueError('transmit power and gain must be >= 0')
    return bandwidth_hz * float(np.log2(1 + power_mw * gain / noise_mw))
