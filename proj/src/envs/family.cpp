#include "nmrl/envs.hpp"

namespace nmrl {

StepResult TaskEnv::step_discrete(std::size_t) {
    throw ContractError("this environment takes continuous actions");
}

StepResult TaskEnv::step_continuous(const std::vector<double>&) {
    throw ContractError("this environment takes discrete actions");
}

} // namespace nmrl
