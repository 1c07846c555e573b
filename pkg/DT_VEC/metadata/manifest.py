import os
from datetime import datetime
from lxml import etree
from DT_VEC.config import SimConfig, convert_value, format_value
from DT_VEC.ancillary import generate_unique_id, version
from DT_VEC.metadata.mapping import NS_MAP, FEATURE_MAP


def _nsc(text, nsmap=NS_MAP):
    ns, key = text.split(':')
    return '{{{0}}}{1}'.format(nsmap[ns], key)


def run_id(config, algo, seed):
    """Four-digit hexadecimal identifier of a (configuration, algorithm, seed) combination."""
    text = '|'.join([algo, str(seed)] + ['{}={}'.format(k, format_value(v)) for k, v in config.to_dict().items()])
    return generate_unique_id(encoded_str=text.encode())


def _configuration(root, config):
    conf = etree.SubElement(root, _nsc('dt:configuration'))
    for k, v in config.to_dict().items():
        param = etree.SubElement(conf, _nsc('dt:parameter'), attrib={'name': k})
        param.text = format_value(v)
    derived = etree.SubElement(conf, _nsc('dt:derived'))
    for name, value in [('capacity_hz', config.capacity_hz), ('grid_hz', config.grid_hz),
                        ('action_count', config.action_count)]:
        item = etree.SubElement(derived, _nsc('dt:quantity'), attrib={'name': name})
        item.text = format_value(value)


def _seeds(root, seed, streams):
    seeds = etree.SubElement(root, _nsc('dt:seeds'), attrib={'base': str(seed)})
    for name, value in streams.items():
        stream = etree.SubElement(seeds, _nsc('dt:stream'), attrib={'name': name})
        stream.text = str(value)


def _schedule(root, schedule):
    sched = etree.SubElement(root, _nsc('dt:schedule'))
    for name, value in schedule.items():
        item = etree.SubElement(sched, _nsc('dt:state'), attrib={'name': name})
        item.text = format_value(value)
    features = etree.SubElement(sched, _nsc('dt:featureScaling'))
    for name, value in FEATURE_MAP.items():
        item = etree.SubElement(features, _nsc('dt:feature'), attrib={'name': name})
        item.text = format_value(value)


def write_manifest(outname, config, algo, seed, streams, schedule, files):
    """
    Writes the run manifest: a full echo of the configuration, the seeds of every random stream, the software
    version, the schedule state at the end of training and the list of output files.

    Parameters
    ----------
    outname: str
        Full path of the XML file.
    config: DT_VEC.config.SimConfig
    algo: str
    seed: int
        Base seed of the run.
    streams: dict
        Stream name -> derived seed.
    schedule: dict
        Schedule state, e.g. final exploration rate and number of training episodes run.
    files: dict
        File role -> path relative to the run directory.

    Returns
    -------
    str
        The name of the written file.
    """
    root = etree.Element(_nsc('dt:RunManifest'), nsmap=NS_MAP,
                         attrib={'id': run_id(config, algo, seed)})
    software = etree.SubElement(root, _nsc('dt:software'), attrib={'name': 'DT_VEC'})
    software.text = version()
    created = etree.SubElement(root, _nsc('dt:creationTime'))
    created.text = datetime.now().isoformat(timespec='seconds')
    algorithm = etree.SubElement(root, _nsc('dt:algorithm'))
    algorithm.text = algo
    _seeds(root, seed, streams)
    _configuration(root, config)
    _schedule(root, schedule)
    outputs = etree.SubElement(root, _nsc('dt:outputs'))
    for role, path in files.items():
        item = etree.SubElement(outputs, _nsc('dt:file'), attrib={'role': role})
        item.text = path

    os.makedirs(os.path.dirname(os.path.abspath(outname)), exist_ok=True)
    tree = etree.ElementTree(root)
    tree.write(outname, pretty_print=True, xml_declaration=True, encoding='utf-8')
    return outname


def read_manifest(filename):
    """
    Reads a run manifest.

    Parameters
    ----------
    filename: str

    Returns
    -------
    config: dict
        The configuration, typed as by :func:`DT_VEC.config.get_config`.
    algo: str
    seed: int
    """
    if not os.path.isfile(filename):
        raise FileNotFoundError('Manifest {} does not exist.'.format(filename))
    root = etree.parse(filename).getroot()
    if root.tag != _nsc('dt:RunManifest'):
        raise ValueError('{} is not a run manifest (root element {})'.format(filename, root.tag))
    config = {}
    for param in root.findall('{}/{}'.format(_nsc('dt:configuration'), _nsc('dt:parameter'))):
        config[param.get('name')] = convert_value(param.get('name'), param.text)
    SimConfig.from_dict(config)
    algo = root.find(_nsc('dt:algorithm')).text
    seed = int(root.find(_nsc('dt:seeds')).get('base'))
    return config, algo, seed


def list_outputs(filename):
    """File role -> relative path, as listed in a manifest."""
    root = etree.parse(filename).getroot()
    return {item.get('role'): item.text
            for item in root.findall('{}/{}'.format(_nsc('dt:outputs'), _nsc('dt:file')))}
