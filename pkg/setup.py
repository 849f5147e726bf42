#!/usr/bin/env python3
"""
EDM Relax Setup Script
======================

Installation, configuration and test helper for the dissipative extended
Dicke model toolkit.

Usage:
    python setup.py [command]

Commands:
    install     Install all dependencies
    configure   Write or show the default configuration
    test        Run the unit tests
    clean       Clean build artifacts and run outputs
    help        Show this help message
"""

import argparse
import importlib
import json
import shutil
import subprocess
import sys
from pathlib import Path

REQUIRED_MODULES = ["model.py", "semiclassical.py", "diag.py", "dynamics.py", "oracle.py", "cli.py"]
PRESETS = ["fig2", "fig3", "bare", "adhoc", "dressed", "oracle", "sweep"]
RUNTIME_PACKAGES = ["numpy", "scipy", "pandas", "sklearn"]


class EDMSetup:
    def __init__(self):
        self.root_dir = Path(__file__).parent
        self.config_file = self.root_dir / "edm_config.json"
        self.requirements_file = self.root_dir / "requirements.txt"

    def check_python_version(self):
        if sys.version_info < (3, 8):
            print(f"❌ Python 3.8+ required, found {sys.version.split()[0]}")
            return False
        print(f"✅ Python {sys.version.split()[0]} detected")
        return True

    def install_python_dependencies(self):
        """Install Python dependencies"""
        print("\n📦 Installing Python dependencies...")

        if not self.requirements_file.exists():
            print("❌ requirements.txt not found")
            return False

        try:
            subprocess.run([
                sys.executable, "-m", "pip", "install", "-r", str(self.requirements_file)
            ], check=True)
            print("✅ Python dependencies installed successfully")
            return True
        except subprocess.CalledProcessError as e:
            print(f"❌ Failed to install Python dependencies: {e}")
            return False

    def verify_files(self):
        """Verify modules and presets exist"""
        print("\n📁 Verifying project files...")

        required = REQUIRED_MODULES + [f"presets/{name}.json" for name in PRESETS]
        missing_files = [f for f in required if not (self.root_dir / f).exists()]

        if missing_files:
            print("❌ Missing required files:")
            for file in missing_files:
                print(f"  • {file}")
            return False

        print("✅ All required files present")
        return True

    def create_config(self):
        """Write the default configuration file"""
        print("\n⚙️  Creating configuration...")

        try:
            sys.path.insert(0, str(self.root_dir))
            from cli import DEFAULT_CONFIG
            config = dict(DEFAULT_CONFIG, output=dict(DEFAULT_CONFIG["output"], dir="results"))
            with open(self.config_file, 'w') as f:
                json.dump(config, f, indent=2)
                f.write("\n")
            print(f"✅ Configuration created: {self.config_file}")
            return True
        except Exception as e:
            print(f"❌ Failed to create configuration: {e}")
            return False

    def check_imports(self):
        """Import the numerical stack the modules rely on"""
        missing = []
        for package in RUNTIME_PACKAGES:
            try:
                importlib.import_module(package)
            except ImportError:
                missing.append(package)
        if missing:
            print(f"❌ Missing packages: {', '.join(missing)} (run: python setup.py install)")
            return False
        print(f"✅ {', '.join(RUNTIME_PACKAGES)} importable")
        return True

    def smoke_check(self):
        """Diagonalize the fig2 preset and check its self-consistency residuals"""
        result = subprocess.run(
            [sys.executable, "cli.py", "diagonalize", "--preset", "fig2", "--check",
             "--out", str(self.root_dir / "results")],
            cwd=self.root_dir, capture_output=True, text=True
        )
        if result.returncode != 0 or "✅ largest check residual" not in result.stdout:
            print(f"❌ Smoke check failed (exit code {result.returncode})")
            print(result.stderr.strip())
            return False
        print("✅ Diagonalization residuals below 1e-6")
        return True

    def run_tests(self):
        """Run the unittest suite"""
        print("\n🧪 Running unit tests...")

        if not self.check_imports():
            return False

        result = subprocess.run(
            [sys.executable, "-m", "unittest", "discover", "-s", "tests", "-v"],
            cwd=self.root_dir
        )
        if result.returncode != 0:
            print("❌ Unit tests failed")
            return False

        print("✅ All tests passed")
        return True

    def install(self):
        """Version check, files, pip install, default config, then a diagonalization smoke check"""
        print("EDM Relax: dissipative extended Dicke model toolkit\n")

        steps = [
            ("Checking Python version", self.check_python_version),
            ("Verifying project files", self.verify_files),
            ("Installing Python dependencies", self.install_python_dependencies),
            ("Creating configuration", self.create_config),
            ("Running numerical smoke check", self.smoke_check),
        ]

        for step_name, step_func in steps:
            print(f"\n🔄 {step_name}...")
            if not step_func():
                print(f"\n❌ Installation failed at: {step_name}")
                return False

        print("\n✅ EDM Relax installed; run `python setup.py test` next")
        return True

    def configure(self):
        """Write the default configuration if missing, then show it"""
        print("EDM Relax Configuration")
        print("="*30)

        if not self.config_file.exists():
            print("No existing configuration found. Creating default...")
            if not self.create_config():
                return False

        try:
            with open(self.config_file, 'r') as f:
                config = json.load(f)
        except Exception as e:
            print(f"Error loading config: {e}")
            return False

        print("Current configuration:")
        print(json.dumps(config, indent=2))
        print("\nEdit edm_config.json, or pass --set section.key=value to cli.py.")

        return True

    def clean(self):
        """Remove caches, logs and the results directory"""

        patterns = [
            "*.pyc", "__pycache__", "edm_log.txt", ".pytest_cache",
            "*.egg-info", "dist", "build"
        ]

        cleaned = 0
        for pattern in patterns:
            for path in self.root_dir.rglob(pattern):
                if "examples" in path.relative_to(self.root_dir).parts:
                    continue
                if path.is_file():
                    path.unlink()
                    cleaned += 1
                elif path.is_dir():
                    shutil.rmtree(path)
                    cleaned += 1

        results = self.root_dir / "results"
        if results.is_dir():
            shutil.rmtree(results)
            cleaned += 1

        print(f"✅ Cleaned {cleaned} artifacts")
        return True

    def help(self):
        print(__doc__)
        return True


def main():
    parser = argparse.ArgumentParser(
        description="EDM Relax Setup Script",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__
    )

    parser.add_argument(
        "command",
        choices=["install", "configure", "test", "clean", "help"],
        default="help",
        nargs="?",
        help="Command to execute"
    )

    args = parser.parse_args()

    setup = EDMSetup()

    if args.command == "install":
        success = setup.install()
    elif args.command == "configure":
        success = setup.configure()
    elif args.command == "test":
        success = setup.run_tests()
    elif args.command == "clean":
        success = setup.clean()
    else:
        success = setup.help()

    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
