#include <pybind11/pybind11.h>
namespace py = pybind11;
PYBIND11_MODULE(_dtu, m) { m.doc() = "DTU-Net core operations"; }
