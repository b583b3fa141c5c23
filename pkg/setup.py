import os
from setuptools import find_packages, setup

with open(os.path.join(os.path.dirname(__file__), 'README.rst')) as readme:
	README = readme.read()

os.chdir(os.path.normpath(os.path.join(os.path.abspath(__file__), os.pardir)))

setup(
	name='ddfsim',
	version='0.1.0',
	packages=find_packages(exclude=['examples', 'examples.*']),
	include_package_data=True,
	license='GPL License',
	description='Simulation and analysis of the dynamic decode-and-forward relay channel.',
	long_description=README,
	python_requires='>=3.8',
	install_requires=[
		'numpy>=1.20',
		'scipy>=1.7',
		'numba>=0.55',
	],
	entry_points={
		'console_scripts': ['ddfsim = ddfsim.cli:main'],
	},
	test_suite='ddfsim.tests',
	classifiers=[
		'Environment :: Console',
		'Intended Audience :: Science/Research',
		'License :: OSI Approved :: GPL License',
		'Operating System :: Linux',
		'Programming Language :: Python',
		'Programming Language :: Python :: 3',
		'Topic :: Scientific/Engineering',
	],
)
