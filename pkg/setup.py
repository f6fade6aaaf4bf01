from setuptools import find_packages, setup

with open("requirements.txt", "r", encoding="utf-8") as handle:
    requirements = [line.strip() for line in handle if line.strip() and not line.startswith("#")]

setup(
    name="stepguard",
    version="0.3.0",
    description="Failure detection for multi-step LLM interactions: step- and response-level confidence scoring",
    packages=find_packages(exclude=["tests", "tests.*"]) + ["config"],
    package_data={"config": ["*.json", "prompts/*.txt"]},
    py_modules=["main"],
    install_requires=requirements,
    python_requires=">=3.9",
    entry_points={"console_scripts": ["stepguard=main:cli"]},
)
