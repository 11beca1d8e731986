#include "mint/neuro/adam.hpp"
#include "mint/neuro/layers.hpp"
#include "mint/neuro/losses.hpp"
#include "mint/neuro/ops.hpp"
#include "mint/neuro/tensor.hpp"

// The tensor substrate is header-only and templated on the scalar type; this
// translation unit pins the two supported instantiations so template bugs
// surface when the library itself is built.

namespace mint::neuro {

template class TensorT<float>;
template class TensorT<double>;
template class AdamT<float>;
template class AdamT<double>;

}  // namespace mint::neuro
