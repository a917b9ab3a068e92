from setuptools import setup

with open("alkatomo/include/VERSION", "r") as f:
    version = f.read().strip()

setup(
    name="alkatomo",
    version=version,
    license="BSD 3-Clause License",
    description="Optical quantum-state tomography of spin-1 atomic ensembles",
    packages=["alkatomo"],
    package_data={"alkatomo": ["include/VERSION"]},
    zip_safe=False,
    scripts=["bin/alkatomo"],
    install_requires=["numpy", "scipy"],
    extras_require={"test": ["pytest"]},
    include_package_data=True,
)
