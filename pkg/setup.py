from setuptools import setup, find_packages

setup(
    name="TrustQN",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    install_requires=[
        "numpy",
        "scipy",
    ],
    extras_require={
        "test": ["pytest"],
    },
    entry_points={
        "console_scripts": ["trustqn=TrustQN.cli:main"],
    },
    python_requires=">=3.8",
    description="TrustQN: limited-memory BFGS and SR1 trust-region methods, deterministic and "
                "overlapping multi-batch stochastic, for training small networks."

)
