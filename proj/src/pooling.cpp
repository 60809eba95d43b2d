#include "mmmi/pooling.hpp"

namespace mmmi {

template PooledInference pool_nested<double>(const NestedEstimateGrid&, double);
template PooledInference pool_flat<double>(std::span<const ScalarEstimate>, double);

}  // namespace mmmi
