import subprocess
import sys
from pathlib import Path

import pybind11
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).parent.resolve()
        extdir = Path(self.get_ext_fullpath(ext.name)).parent.resolve()
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)
        subprocess.check_call([
            "cmake", str(source_dir),
            "-DCMAKE_BUILD_TYPE=Release",
            "-DDMSRD_BUILD_TESTS=OFF",
            f"-Dpybind11_DIR={pybind11.get_cmake_dir()}",
            f"-DPYTHON_EXECUTABLE={sys.executable}",
            f"-DCMAKE_LIBRARY_OUTPUT_DIRECTORY={extdir}",
        ], cwd=build_dir)
        subprocess.check_call(
            ["cmake", "--build", ".", "--target", "_dmsrd", "-j"], cwd=build_dir)


setup(
    ext_modules=[CMakeExtension("dmsrd._dmsrd")],
    cmdclass={"build_ext": CMakeBuild},
)
