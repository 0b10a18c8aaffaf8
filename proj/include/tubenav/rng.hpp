#ifndef TUBENAV_RNG_HPP
#define TUBENAV_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace tubenav {

// Seeded generator with hand-rolled draw helpers. std::*_distribution output is
// implementation-defined, so every mapping from raw bits to values lives here;
// a fixed seed gives the same stream on every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw std::domain_error("uniform_below(0)");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % n;
    }

    int uniform_int(int lo, int hi) { // inclusive bounds
        return lo + static_cast<int>(uniform_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Box-Muller without the cached spare so serialized state is the whole story.
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        if (!is) throw std::runtime_error("bad rng state string");
    }

  private:
    std::mt19937_64 eng_;
};

} // namespace tubenav

#endif
