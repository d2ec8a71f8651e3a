#include <atomic>
#include <cstdlib>
#include <string>

#include "affect/error.hpp"
#include "affect/simd/kernels.hpp"

namespace affect::simd {
namespace {

bool cpu_has(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
#if defined(AFFECT_HAVE_X86_KERNELS)
        case Isa::avx2:
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
        case Isa::avx512:
            return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("fma");
#else
        case Isa::avx2:
        case Isa::avx512:
            return false;
#endif
    }
    return false;
}

const KernelSet* initial_selection() {
    if (const char* env = std::getenv("AFFECT_E2E_SIMD")) {
        const Isa wanted = parse_isa(env);
        if (isa_supported(wanted)) return &kernels_for(wanted);
    }
    return &kernels_for(best_isa());
}

std::atomic<const KernelSet*>& slot() {
    static std::atomic<const KernelSet*> current{initial_selection()};
    return current;
}

}  // namespace

bool isa_supported(Isa isa) { return cpu_has(isa); }

Isa best_isa() {
    if (cpu_has(Isa::avx512)) return Isa::avx512;
    if (cpu_has(Isa::avx2)) return Isa::avx2;
    return Isa::scalar;
}

std::vector<Isa> supported_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
        if (cpu_has(isa)) out.push_back(isa);
    }
    return out;
}

const KernelSet& kernels_for(Isa isa) {
    if (!cpu_has(isa)) {
        throw ParameterError("instruction set not available on this CPU: " + std::string(isa_name(isa)));
    }
    switch (isa) {
#if defined(AFFECT_HAVE_X86_KERNELS)
        case Isa::avx2:
            return avx2_kernels();
        case Isa::avx512:
            return avx512_kernels();
#endif
        default:
            return scalar_kernels();
    }
}

const KernelSet& active() { return *slot().load(std::memory_order_acquire); }

void select(Isa isa) { slot().store(&kernels_for(isa), std::memory_order_release); }

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return "scalar";
        case Isa::avx2:
            return "avx2";
        case Isa::avx512:
            return "avx512";
    }
    return "unknown";
}

Isa parse_isa(std::string_view name) {
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2") return Isa::avx2;
    if (name == "avx512") return Isa::avx512;
    throw ParameterError("unknown instruction set '" + std::string(name) + "'");
}

}  // namespace affect::simd
