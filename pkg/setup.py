from setuptools import setup, find_packages
import pathlib

here = pathlib.Path(__file__).parent.resolve()
long_description = (here / 'README.md').read_text(encoding='utf-8')

setup(
    name='DT_VEC',
    setup_requires=['setuptools_scm'],
    use_scm_version={'fallback_version': '0.1.0'},
    description="Digital-twin vehicular edge network simulator with multi-agent actor-critic resource allocation",
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=find_packages(where='.', exclude=['tests']),
    include_package_data=True,
    install_requires=['click',
                      'lxml',
                      'numpy',
                      'pandas>=1.5',
                      'scipy'],
    extras_require={'test': ['pytest']},
    python_requires='>=3.8',
    zip_safe=False,
    entry_points={
        'console_scripts': ['dt_vec=DT_VEC.cli:cli']
    }
)
