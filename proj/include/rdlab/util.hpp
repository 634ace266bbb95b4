#pragma once

#include <cstdint>
#include <cmath>
#include <string>
#include <thread>
#include <vector>
#include <functional>
#include <algorithm>
#include <numeric>

namespace rdlab {

// Counter-based generator: every draw is a pure function of (seed, counter),
// so streams are identical across platforms and thread layouts.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // uniform in [0,1), 53 random bits
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    // index sampled from an unnormalized nonnegative weight vector
    int discrete(const std::vector<double>& w) {
        double total = std::accumulate(w.begin(), w.end(), 0.0);
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < w.size(); ++i) {
            acc += w[i];
            if (u < acc) return int(i);
        }
        return int(w.size()) - 1;
    }

private:
    std::uint64_t state_;
};

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;   // standard error of the mean
    std::size_t n = 0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe r;
    r.n = xs.size();
    if (r.n == 0) return r;
    double m = std::accumulate(xs.begin(), xs.end(), 0.0) / double(r.n);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    r.mean = m;
    if (r.n > 1) r.se = std::sqrt(ss / double(r.n - 1) / double(r.n));
    return r;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double rss = 0.0;  // residual sum of squares
    std::size_t n = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LineFit f;
    f.n = std::min(x.size(), y.size());
    if (f.n < 2) return f;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < f.n; ++i) { mx += x[i]; my += y[i]; }
    mx /= double(f.n); my /= double(f.n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < f.n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.rss = std::max(0.0, syy - f.slope * sxy);
    f.r2 = (syy > 0.0) ? 1.0 - f.rss / syy : 1.0;
    return f;
}

// Parallel map over a fixed number of chunks with a seed-ordered reduction.
// The chunk partition is independent of the worker count, so results are
// bit-identical for any --threads value.
inline int& thread_override() {
    static int v = 0;  // 0: no override
    return v;
}

inline int default_thread_count() {
    if (thread_override() > 0) return thread_override();
    if (const char* env = std::getenv("RDLAB_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc);
}

template <typename Out>
std::vector<Out> chunked_map(std::size_t n_chunks,
                             const std::function<Out(std::size_t)>& job,
                             int threads) {
    std::vector<Out> results(n_chunks);
    if (threads <= 1 || n_chunks <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) results[c] = job(c);
        return results;
    }
    std::vector<std::thread> pool;
    std::size_t per = (n_chunks + std::size_t(threads) - 1) / std::size_t(threads);
    for (int t = 0; t < threads; ++t) {
        std::size_t lo = std::size_t(t) * per, hi = std::min(n_chunks, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi]() {
            for (std::size_t c = lo; c < hi; ++c) results[c] = job(c);
        });
    }
    for (auto& th : pool) th.join();
    return results;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// -ln(tanh(x)), stable for large x where tanh rounds to 1
inline double neg_log_tanh(double x) {
    if (x > 18.0) {
        double e = std::exp(-2.0 * x);
        return 2.0 * e * (1.0 + e * (1.0 + e));  // -ln(1-2e+2e^2-...) expanded
    }
    return -std::log(std::tanh(x));
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace rdlab
