from setuptools import setup, find_packages


setup(
    name="mataformer",
    version="0.1.0",
    python_requires=">=3.10",
    packages=find_packages(exclude=["examples", "examples.*"]),
    license="MIT",
    long_description=open("README.md").read(),
    package_data={"mataformer": ["py.typed"]},
    install_requires=[
        "numpy>=1.23",
        "scipy>=1.9",
        "click==8.1.3",
        "msgpack==1.0.4",
        "tomli==2.0.1",
    ],
    entry_points={"console_scripts": ["mataformer=mataformer.cli:main"]},
)
