#include "rdlab/presets.hpp"

namespace rdlab {

namespace {

const char* UNIFORM_DOUBLING = R"(# angle-doubling with the log-derivative potential
[environment]
kind = iid
marginal = 1.0
seed = 101

[system]
family = circle
k_base = 2
state0.eps = 0
state0.shape = none
alpha = 1.0

[potential]
kind = neg_log_deriv

[observable]
kind = cos

[path]
offset = 0
length = 1400
seed = 7

[discretization]
scheme = ulam
resolution = 512

[analysis]
run = rpf decay var
burn_in = 64
tol = 1e-8
s = 3
decay.n_max = 5
decay.tests = weierstrass cos generic
var.n_grid = 16 32 64 128 256 512
var.k_max = 32
assert.lambda_sandwich = 1
assert.sigma2 = 0.5
assert.sigma2_tol = 0.002
assert.var_slope_max = -0.4
assert.regime = exponential
assert.exp_rate = -0.6931471805599453
assert.exp_rate_rel_tol = 0.15

[output]
dir = out/uniform-doubling
)";

const char* PERTURBED_CIRCLE = R"(# doubling mixed with a neutral-fixed-point fiber, persistent Markov driving
[environment]
kind = markov
transition = 0.8 0.2 ; 0.2 0.8
seed = 202

[system]
family = circle
k_base = 2
state0.eps = 1.0
state0.shape = neutral
state1.eps = 0
state1.shape = none
alpha = 1.0

[potential]
kind = neg_log_deriv

[observable]
kind = cos

[path]
offset = 0
length = 3200
seed = 11

[discretization]
scheme = ulam
resolution = 128

[analysis]
run = rpf decay clt
burn_in = 256
tol = 1e-6
s = 3
decay.n_max = 512
decay.tests = weierstrass cos generic
clt.n_grid = 256 1024
clt.mc_samples = 20000
clt.sigma_mode = sample
clt.seed = 5
assert.esseen_dominates = 1

[output]
dir = out/perturbed-circle
)";

const char* RANDOM_SFT_2 = R"(# two-state random subshift: full shift mixed with the golden-mean shift
[environment]
kind = markov
transition = 0.7 0.3 ; 0.3 0.7
seed = 303

[system]
family = sft
alphabet = 2
matrix0 = 1 1 ; 1 1
matrix1 = 0 1 ; 1 1

[potential]
kind = per_symbol
state0.values = 0 0
state1.values = 0.1 -0.1

[observable]
kind = per_symbol
state0.values = 1 -1
state1.values = 1 -1

[path]
offset = 0
length = 1200
seed = 13

[discretization]
scheme = cylinder
resolution = 2

[analysis]
run = mixing rpf decay
burn_in = 64
tol = 1e-8
s = 3
decay.n_max = 128
mixing.g = 0.5 1.0
mixing.n_max = 20
mixing.mc_samples = 20000
assert.lambda_sandwich = 1
assert.mixing_bound = 1

[output]
dir = out/random-sft-2
)";

const char* COBOUNDARY_NULL = R"(# coboundary observable: the degenerate variance case
[environment]
kind = iid
marginal = 1.0
seed = 404

[system]
family = circle
k_base = 2
state0.eps = 0
state0.shape = none
alpha = 1.0

[potential]
kind = neg_log_deriv

[observable]
kind = coboundary

[path]
offset = 0
length = 1400
seed = 17

[discretization]
scheme = ulam
resolution = 128

[analysis]
run = rpf var
burn_in = 64
tol = 1e-8
var.n_grid = 16 64 256 512
var.k_max = 8
assert.sigma2 = 0.0
assert.sigma2_tol = 1e-6

[output]
dir = out/coboundary-null
)";

const char* MDP_DEMO = R"(# moderate-deviation scalings for the doubling map
[environment]
kind = iid
marginal = 1.0
seed = 505

[system]
family = circle
k_base = 2
state0.eps = 0
state0.shape = none
alpha = 1.0

[potential]
kind = neg_log_deriv

[observable]
kind = cos

[path]
offset = 0
length = 4800
seed = 19

[discretization]
scheme = ulam
resolution = 64

[analysis]
run = rpf var mdp
burn_in = 64
tol = 1e-8
var.n_grid = 64 256 1024
var.k_max = 16
mdp.a_expo = 0.1
mdp.t_grid = -0.5 -0.25 0.25 0.5
mdp.gamma = 0.5 1e9
mdp.n_grid = 256 1024 4096
mdp.mc_samples = 20000
mdp.seed = 23
assert.cumulant_rel_tol = 0.1

[output]
dir = out/mdp-demo
)";

}  // namespace

const std::vector<Preset>& presets() {
    static const std::vector<Preset> list = {
        {"uniform-doubling", "angle-doubling baseline: exact triplet, exponential decay, variance 1/2",
         UNIFORM_DOUBLING},
        {"perturbed-circle", "neutral-fiber mixture under a persistent Markov environment",
         PERTURBED_CIRCLE},
        {"random-sft-2", "random two-symbol subshift with weighted symbols and mixing tables",
         RANDOM_SFT_2},
        {"coboundary-null", "coboundary observable: variance degenerates to zero", COBOUNDARY_NULL},
        {"mdp-demo", "moderate-deviation cumulants and interval rates for the doubling map",
         MDP_DEMO},
    };
    return list;
}

const Preset* find_preset(const std::string& name) {
    for (const auto& p : presets())
        if (p.name == name) return &p;
    return nullptr;
}

}  // namespace rdlab
