#pragma once

namespace soel {

/// Hardware: fixed-point dynamics, 8-bit weights, 7-bit stochastically
/// rounded traces. Full: real-valued states and traces, used for oracle
/// checks.
enum class Precision { Hardware, Full };

}  // namespace soel
