import os
import sys
import logging
import hashlib
import binascii
from datetime import datetime
from importlib import metadata
import numpy as np
import scipy
import pandas as pd
from lxml import etree
import DT_VEC


def generate_unique_id(encoded_str):
    """
    Returns a unique identifier as a hexa-decimal string generated from an encoded string.
    The CRC-16 algorithm used to compute the unique identifier is CRC-CCITT (0xFFFF).

    Parameters
    ----------
    encoded_str: bytes
        A string that should be used to generate a unique id from. The string needs to be encoded; e.g.:
        `'abc'.encode()`

    Returns
    -------
    p_id: str
        The unique identifier.
    """
    crc = binascii.crc_hqx(encoded_str, 0xffff)
    p_id = '{:04X}'.format(crc & 0xffff)

    return p_id


def derive_seed(*parts):
    """
    Derives a child seed from an arbitrary tuple of seed components, e.g. (base seed, swept value, replicate).
    The result depends only on the components, not on the order in which cells are enumerated.

    Parameters
    ----------
    parts: int or float or str
        The seed components.

    Returns
    -------
    int
        A non-negative 63-bit integer seed.
    """
    text = '|'.join(repr(p) for p in parts).encode()
    digest = hashlib.sha256(text).digest()
    return int.from_bytes(digest[:8], 'little') >> 1


def version():
    """The package version string, or 'unknown' if the package is not installed."""
    return getattr(DT_VEC, '__version__', 'unknown')


def write_csv(frame, outname):
    """
    Writes a table with a header row and all floating point values printed with 17 significant digits,
    so that identical inputs produce byte-identical files.

    Parameters
    ----------
    frame: pandas.DataFrame or list[dict]
        The table to write.
    outname: str
        Full path of the CSV file.

    Returns
    -------
    str
        The name of the written file.
    """
    if not isinstance(frame, pd.DataFrame):
        frame = pd.DataFrame(frame)
    os.makedirs(os.path.dirname(os.path.abspath(outname)), exist_ok=True)
    frame.to_csv(outname, index=False, float_format='%.17g', lineterminator='\n')
    return outname


def set_logging(log_dir, config, debug=False):
    """
    Set logging for the current process.

    Parameters
    ----------
    log_dir: str
        Directory the log file is written to. Created if it does not exist.
    config: DT_VEC.config.SimConfig
        The configuration of the current process, written to the head of the log file.
    debug: bool, optional
        Log every training episode instead of every 100th? Default is False.

    Returns
    -------
    log_local: logging.Logger
        The log handler for the current process.
    """
    now = datetime.now().strftime('%Y%m%dT%H%M')
    log_local = logging.getLogger(__name__)
    log_local.setLevel(logging.DEBUG if debug else logging.INFO)
    for handler in list(log_local.handlers):
        log_local.removeHandler(handler)
        handler.close()
    log_file = os.path.join(log_dir, f"{now}_process.log")
    os.makedirs(os.path.dirname(log_file), exist_ok=True)
    fh = logging.FileHandler(filename=log_file, mode='a')
    log_local.addHandler(fh)

    # Add header first with simple formatting
    form_simple = logging.Formatter("%(message)s")
    fh.setFormatter(form_simple)
    _log_process_config(logger=log_local, config=config)

    # Use normal formatting from here on out
    form = logging.Formatter("[%(asctime)s] [%(levelname)8s] %(message)s")
    fh.setFormatter(form)

    return log_local


def _log_process_config(logger, config):
    """
    Adds a header to the logfile, which includes information about the current simulation configuration.

    Parameters
    ----------
    logger: Logger
        The logger to which the header is added to.
    config: DT_VEC.config.SimConfig
        The configuration of the current process.

    Returns
    -------
    None
    """
    params = '\n    '.join('{} = {}'.format(k, v) for k, v in config.to_dict().items())

    header = f"""
    ====================================================================================================================
    SIMULATION CONFIGURATION

    {params}

    server capacity F [Hz] = {config.capacity_hz}
    action grid step [Hz] = {config.grid_hz}
    actions per agent = {config.action_count}

    ====================================================================================================================
    SOFTWARE

    DT_VEC: {version()}
    python: {sys.version}
    python-numpy: {np.__version__}
    python-scipy: {scipy.__version__}
    python-pandas: {pd.__version__}
    python-lxml: {'.'.join(str(x) for x in etree.LXML_VERSION)}
    python-click: {metadata.version('click')}

    ====================================================================================================================
    """
    logger.info(header)


def log(handler, mode, proc_step, algo, seed, msg):
    """Helper function to format and handle log messages during processing."""
    proc_step = proc_step.zfill(7).replace('0', ' ')
    message = '[{proc_step}] -- {algo} [{seed}] -- {msg}'
    message = message.format(proc_step=proc_step, algo=algo, seed=seed, msg=msg)
    if mode == 'info':
        handler.info(message)
    elif mode == 'debug':
        handler.debug(message)
    elif mode == 'warning':
        handler.warning(message)
    elif mode == 'exception':
        handler.exception(message)
    else:
        raise RuntimeError('log mode {} is not supported'.format(mode))
