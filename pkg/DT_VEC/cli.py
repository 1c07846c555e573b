import click
import DT_VEC.processor as process
from DT_VEC.metadata.mapping import ALGO_MAP, SWEEP_PARAMS


def _comma_list(text):
    return [item.strip() for item in text.split(',') if item.strip() != '']


@click.group()
def cli():
    """Digital-twin vehicular edge network simulator with multi-agent actor-critic resource allocation."""
    pass


@cli.command()
@click.option('--config', '-c', 'config_file', required=True, type=click.Path(exists=True),
              help='Full path to an INI-style configuration text file or to the manifest.xml of an earlier run.')
@click.option('--section', '-s', required=False, type=str, default='GENERAL', show_default=True,
              help='Section of the configuration file to read parameters from.')
@click.option('--algo', type=click.Choice(list(ALGO_MAP.keys())), default=None,
              help='Allocation algorithm. Required unless a manifest is given.')
@click.option('--seed', type=int, default=None, help='Run seed. Default: the manifest seed or 0.')
@click.option('--out', '-o', 'out_dir', required=True, type=click.Path(), help='Output directory of the run.')
@click.option('--debug', is_flag=True, help='Log every training episode.')
def run(config_file, section, algo, seed, out_dir, debug):
    """Train (if applicable) and evaluate one algorithm."""
    row = process.run(config_file=config_file, algo=algo, seed=seed, out_dir=out_dir, section_name=section,
                      debug=debug)
    click.echo('mean reward {:.4f} | utilization {:.4f} | mean utility {:.4f}'
               .format(row['mean_reward'], row['utilization'], row['mean_utility']))


@cli.command()
@click.option('--config', '-c', 'config_file', required=True, type=click.Path(exists=True),
              help='Full path to an INI-style configuration text file.')
@click.option('--section', '-s', required=False, type=str, default='GENERAL', show_default=True,
              help='Section of the configuration file to read parameters from.')
@click.option('--algo', type=click.Choice(['random', 'equal', 'shared']), required=True,
              help='Baseline allocator.')
@click.option('--seed', type=int, default=0, show_default=True, help='Run seed.')
@click.option('--out', '-o', 'out_dir', required=True, type=click.Path(), help='Output directory of the run.')
@click.option('--debug', is_flag=True, help='Log every training episode.')
def baseline(config_file, section, algo, seed, out_dir, debug):
    """Evaluate a baseline allocator."""
    row = process.run(config_file=config_file, algo=algo, seed=seed, out_dir=out_dir, section_name=section,
                      debug=debug)
    click.echo('mean reward {:.4f} | utilization {:.4f} | mean utility {:.4f}'
               .format(row['mean_reward'], row['utilization'], row['mean_utility']))


@cli.command()
@click.option('--config', '-c', 'config_file', required=True, type=click.Path(exists=True),
              help='Full path to an INI-style configuration text file.')
@click.option('--section', '-s', required=False, type=str, default='GENERAL', show_default=True,
              help='Section of the configuration file to read parameters from.')
@click.option('--param', type=click.Choice(SWEEP_PARAMS), required=True, help='Swept parameter.')
@click.option('--values', required=True, type=str, help='Comma-separated parameter values, e.g. 3,5,7.')
@click.option('--seeds', required=True, type=str, help='Comma-separated replicate indices, e.g. 1,2,3.')
@click.option('--algo', 'algos', type=str, default='marl,random', show_default=True,
              help='Comma-separated algorithms.')
@click.option('--seed', 'base_seed', type=int, default=0, show_default=True,
              help='Base seed from which the seed of every cell is derived.')
@click.option('--workers', type=int, default=1, show_default=True, help='Number of parallel worker processes.')
@click.option('--out', '-o', 'out_dir', required=True, type=click.Path(), help='Output directory of the sweep.')
@click.option('--debug', is_flag=True, help='Log debugging information.')
def sweep(config_file, section, param, values, seeds, algos, base_seed, workers, out_dir, debug):
    """Run a parameter sweep over several seeds and algorithms."""
    algos = _comma_list(algos)
    for algo in algos:
        if algo not in ALGO_MAP.keys():
            raise click.BadParameter("'{}' is not one of {}".format(algo, list(ALGO_MAP.keys())),
                                     param_hint='--algo')
    try:
        seeds = [int(s) for s in _comma_list(seeds)]
    except ValueError as e:
        raise click.BadParameter('expected comma-separated integers', param_hint='--seeds') from e
    table = process.sweep(config_file=config_file, param=param, values=_comma_list(values), seeds=seeds,
                          algos=algos, out_dir=out_dir, base_seed=base_seed, section_name=section,
                          workers=workers, debug=debug)
    click.echo(table.to_string(index=False))


@cli.command()
@click.argument('trajectories', nargs=-1, required=True, type=click.Path(exists=True))
@click.option('--config', '-c', 'config_file', required=True, type=click.Path(exists=True),
              help='Configuration file or manifest of the run(s) that produced the trajectories.')
@click.option('--section', '-s', required=False, type=str, default='GENERAL', show_default=True,
              help='Section of the configuration file to read parameters from.')
def summarize(trajectories, config_file, section):
    """Aggregate trajectory CSV files."""
    config, _, _ = process.load_config(config_file, section)
    metrics = process.summarize(list(trajectories), config)
    for name in ['mean_reward', 'mean_utilization', 'conversion_ratio', 'mean_utility_per_vehicle',
                 'mean_twin_delay_s', 'mean_task_delay_s', 'twin_violation_rate', 'task_violation_rate',
                 'mean_discounted_return']:
        click.echo('{:<26}{:.6g}'.format(name, getattr(metrics, name)))
    click.echo('{:<26}{}'.format('episodes', len(metrics.mean_reward_curve)))
