#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bol.hpp"
#include "error.hpp"
#include "features.hpp"

namespace sollu {

namespace detail {

inline double log_sum_exp(std::span<const double> v)
{
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v)
        mx = std::max(mx, x);
    if (!std::isfinite(mx))
        return mx;
    double s = 0.0;
    for (double x : v)
        s += std::exp(x - mx);
    return mx + std::log(s);
}

// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
inline double unit(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

template <std::size_t Dim>
class DiagonalGmm {
public:
    using Vec = std::array<double, Dim>;

    DiagonalGmm() = default;

    DiagonalGmm(std::vector<double> weights, std::vector<Vec> means, std::vector<Vec> variances)
        : w_(std::move(weights)), mu_(std::move(means)), var_(std::move(variances))
    {
        if (w_.empty() || w_.size() != mu_.size() || w_.size() != var_.size())
            throw Error("mixture parameter sizes disagree");
        double total = 0.0;
        for (double w : w_) {
            if (!(w >= 0.0))
                throw Error("negative mixture weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw Error("mixture weights do not sum to 1");
        for (const auto& v : var_)
            for (double x : v)
                if (!(x > 0.0) || !std::isfinite(x))
                    throw Error("mixture variance must be positive");
        prepare();
    }

    std::size_t components() const { return w_.size(); }
    const std::vector<double>& weights() const { return w_; }
    const std::vector<Vec>& means() const { return mu_; }
    const std::vector<Vec>& variances() const { return var_; }

    // log w_m + log N(x; mu_m, var_m) for every component.
    void component_log_densities(const Vec& x, std::span<double> out) const
    {
        for (std::size_t m = 0; m < w_.size(); ++m) {
            double q = 0.0;
            const auto& mu = mu_[m];
            const auto& iv = inv_var_[m];
            for (std::size_t d = 0; d < Dim; ++d) {
                const double z = x[d] - mu[d];
                q += z * z * iv[d];
            }
            out[m] = log_w_[m] + log_norm_[m] - 0.5 * q;
        }
    }

    double log_likelihood(const Vec& x) const
    {
        std::vector<double> buf(w_.size());
        component_log_densities(x, buf);
        return detail::log_sum_exp(buf);
    }

private:
    void prepare()
    {
        const std::size_t m = w_.size();
        log_w_.resize(m);
        log_norm_.resize(m);
        inv_var_.resize(m);
        for (std::size_t k = 0; k < m; ++k) {
            log_w_[k] = w_[k] > 0.0 ? std::log(w_[k]) : -std::numeric_limits<double>::infinity();
            double s = 0.0;
            for (std::size_t d = 0; d < Dim; ++d) {
                s += std::log(2.0 * std::numbers::pi * var_[k][d]);
                inv_var_[k][d] = 1.0 / var_[k][d];
            }
            log_norm_[k] = -0.5 * s;
        }
    }

    std::vector<double> w_;
    std::vector<Vec> mu_, var_;
    std::vector<double> log_w_, log_norm_;
    std::vector<Vec> inv_var_;
};

struct EmOptions {
    std::size_t components = 15;
    std::size_t max_iter = 200;
    double tol = 1e-6;
    double var_floor_ratio = 1e-4;
    std::size_t kmeans_iter = 10;
};

struct EmTrace {
    std::vector<double> log_likelihood; // total over the data, one per E-step
    std::size_t components = 0;
    bool converged = false;
};

namespace detail {

template <std::size_t Dim>
double sq_dist(const std::array<double, Dim>& a, const std::array<double, Dim>& b)
{
    double s = 0.0;
    for (std::size_t d = 0; d < Dim; ++d) {
        const double z = a[d] - b[d];
        s += z * z;
    }
    return s;
}

template <std::size_t Dim>
std::vector<std::array<double, Dim>> kmeans_pp(std::span<const std::array<double, Dim>> x,
                                               std::size_t k, std::mt19937_64& rng)
{
    const std::size_t n = x.size();
    std::vector<std::array<double, Dim>> c;
    c.push_back(x[std::min(n - 1, std::size_t(unit(rng) * double(n)))]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i)
        d2[i] = sq_dist(x[i], c[0]);
    while (c.size() < k) {
        double total = 0.0;
        for (double v : d2)
            total += v;
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = unit(rng) * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                r -= d2[pick];
                if (r < 0.0)
                    break;
            }
        } else {
            pick = std::min(n - 1, std::size_t(unit(rng) * double(n)));
        }
        c.push_back(x[pick]);
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], sq_dist(x[i], c.back()));
    }
    return c;
}

} // namespace detail

// EM for one diagonal mixture. Fewer vectors than requested components
// reduces the component count; the caller sees it in trace->components.
template <std::size_t Dim>
DiagonalGmm<Dim> fit_gmm(std::span<const std::array<double, Dim>> x, const EmOptions& opt,
                         std::uint64_t seed, EmTrace* trace = nullptr)
{
    using Vec = std::array<double, Dim>;
    const std::size_t n = x.size();
    if (n == 0)
        throw Error("cannot fit a mixture to no data");
    const std::size_t M = std::max<std::size_t>(1, std::min(opt.components, n));

    Vec mean{}, var{}, floor{};
    for (const auto& v : x)
        for (std::size_t d = 0; d < Dim; ++d)
            mean[d] += v[d];
    for (auto& m : mean)
        m /= double(n);
    for (const auto& v : x)
        for (std::size_t d = 0; d < Dim; ++d)
            var[d] += (v[d] - mean[d]) * (v[d] - mean[d]);
    for (std::size_t d = 0; d < Dim; ++d) {
        var[d] /= double(n);
        floor[d] = std::max(opt.var_floor_ratio * var[d], 1e-12);
    }

    std::mt19937_64 rng(seed);
    auto centers = detail::kmeans_pp<Dim>(x, M, rng);
    std::vector<std::size_t> assign(n, 0);
    for (std::size_t it = 0; it <= opt.kmeans_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bd = detail::sq_dist(x[i], centers[0]);
            for (std::size_t k = 1; k < M; ++k) {
                const double dd = detail::sq_dist(x[i], centers[k]);
                if (dd < bd) {
                    bd = dd;
                    best = k;
                }
            }
            changed |= assign[i] != best || it == 0;
            assign[i] = best;
        }
        if (!changed || it == opt.kmeans_iter)
            break;
        std::vector<Vec> sum(M, Vec{});
        std::vector<std::size_t> cnt(M, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++cnt[assign[i]];
            for (std::size_t d = 0; d < Dim; ++d)
                sum[assign[i]][d] += x[i][d];
        }
        for (std::size_t k = 0; k < M; ++k)
            if (cnt[k] > 0)
                for (std::size_t d = 0; d < Dim; ++d)
                    centers[k][d] = sum[k][d] / double(cnt[k]);
    }

    std::vector<double> w(M, 0.0);
    std::vector<Vec> mu = centers, sig(M, Vec{});
    {
        std::vector<std::size_t> cnt(M, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = assign[i];
            ++cnt[k];
            for (std::size_t d = 0; d < Dim; ++d)
                sig[k][d] += (x[i][d] - mu[k][d]) * (x[i][d] - mu[k][d]);
        }
        for (std::size_t k = 0; k < M; ++k) {
            w[k] = double(cnt[k]) / double(n);
            for (std::size_t d = 0; d < Dim; ++d) {
                const double v = cnt[k] > 1 ? sig[k][d] / double(cnt[k]) : var[d];
                sig[k][d] = std::max(v, floor[d]);
            }
        }
        double tw = 0.0;
        for (double v : w)
            tw += v;
        for (auto& v : w)
            v /= tw;
    }

    EmTrace local;
    local.components = M;
    DiagonalGmm<Dim> g(w, mu, sig);
    std::vector<double> resp(n * M), buf(M);
    for (std::size_t it = 0;; ++it) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            g.component_log_densities(x[i], buf);
            const double lse = detail::log_sum_exp(buf);
            ll += lse;
            for (std::size_t k = 0; k < M; ++k)
                resp[i * M + k] = std::exp(buf[k] - lse);
        }
        if (!local.log_likelihood.empty()) {
            const double prev = local.log_likelihood.back();
            if (ll - prev <= opt.tol * std::abs(prev)) {
                local.log_likelihood.push_back(ll);
                local.converged = true;
                break;
            }
        }
        local.log_likelihood.push_back(ll);
        if (it >= opt.max_iter)
            break;

        std::vector<double> nk(M, 0.0);
        std::vector<Vec> s1(M, Vec{}), s2(M, Vec{});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < M; ++k) {
                const double r = resp[i * M + k];
                if (r == 0.0)
                    continue;
                nk[k] += r;
                for (std::size_t d = 0; d < Dim; ++d)
                    s1[k][d] += r * x[i][d];
            }
        }
        auto nmu = g.means();
        auto nvar = g.variances();
        for (std::size_t k = 0; k < M; ++k)
            if (nk[k] > 0.0)
                for (std::size_t d = 0; d < Dim; ++d)
                    nmu[k][d] = s1[k][d] / nk[k];
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < M; ++k) {
                const double r = resp[i * M + k];
                if (r == 0.0)
                    continue;
                for (std::size_t d = 0; d < Dim; ++d) {
                    const double z = x[i][d] - nmu[k][d];
                    s2[k][d] += r * z * z;
                }
            }
        }
        std::vector<double> nw(M);
        double tw = 0.0;
        for (std::size_t k = 0; k < M; ++k)
            tw += nk[k];
        for (std::size_t k = 0; k < M; ++k) {
            nw[k] = nk[k] / tw;
            // A component that lost all mass keeps its previous shape.
            if (nk[k] > 0.0)
                for (std::size_t d = 0; d < Dim; ++d)
                    nvar[k][d] = std::max(s2[k][d] / nk[k], floor[d]);
        }
        double sw = 0.0;
        for (double v : nw)
            sw += v;
        for (auto& v : nw)
            v /= sw;
        g = DiagonalGmm<Dim>(nw, nmu, nvar);
    }
    if (trace)
        *trace = std::move(local);
    return g;
}

template <std::size_t Dim>
struct BasicGmmModel {
    std::map<Bol, DiagonalGmm<Dim>> classes;
    std::size_t components = 15;
};

using GmmModel = BasicGmmModel<kFeatureDim>;

template <std::size_t Dim>
struct BasicTrainResult {
    BasicGmmModel<Dim> model;
    std::map<Bol, EmTrace> traces;
    std::vector<std::string> warnings;
};

// Classes are independent; each gets a seed derived from (seed, class code)
// so the result does not depend on the thread count.
template <std::size_t Dim>
BasicTrainResult<Dim> em_train(const std::map<Bol, std::vector<std::array<double, Dim>>>& data,
                               const EmOptions& opt, std::uint64_t seed, unsigned threads = 0)
{
    BasicTrainResult<Dim> out;
    out.model.components = opt.components;
    std::vector<Bol> keys;
    for (const auto& [k, v] : data) {
        if (v.empty())
            throw Error("class " + std::string(label(k)) + " has no training vectors");
        keys.push_back(k);
        if (v.size() < opt.components)
            out.warnings.push_back("class " + std::string(label(k)) + " has " +
                                   std::to_string(v.size()) + " vectors; using " +
                                   std::to_string(v.size()) + " components");
    }
    std::vector<DiagonalGmm<Dim>> fitted(keys.size());
    std::vector<EmTrace> traces(keys.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < keys.size();) {
            const auto& v = data.at(keys[i]);
            fitted[i] = fit_gmm<Dim>(std::span<const std::array<double, Dim>>(v), opt,
                                     detail::mix_seed(seed ^ std::uint64_t(code(keys[i]))),
                                     &traces[i]);
        }
    };
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, unsigned(std::max<std::size_t>(1, keys.size())));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
        out.model.classes.emplace(keys[i], std::move(fitted[i]));
        out.traces.emplace(keys[i], std::move(traces[i]));
    }
    return out;
}

struct Classification {
    Bol bol = Bol::unknown;
    double score = -std::numeric_limits<double>::infinity();
    std::map<Bol, double> scores;
};

template <std::size_t Dim>
Classification classify(const BasicGmmModel<Dim>& model,
                        std::span<const std::array<double, Dim>> frames)
{
    if (model.classes.empty())
        throw Error("classify with an empty model");
    if (frames.empty())
        throw Error("classify with an empty feature sequence");
    Classification out;
    for (const auto& [bol, g] : model.classes) {
        double s = 0.0;
        for (const auto& f : frames)
            s += g.log_likelihood(f);
        out.scores[bol] = s;
        // strict comparison in ascending code order keeps the lowest code on ties
        if (out.bol == Bol::unknown || s > out.score) {
            out.bol = bol;
            out.score = s;
        }
    }
    return out;
}

inline Classification classify(const GmmModel& model, const FeatureSequence& seq)
{
    return classify<kFeatureDim>(model, std::span<const FeatureVector>(seq.vectors));
}

template <std::size_t Dim>
nlohmann::json model_to_json(const BasicGmmModel<Dim>& model)
{
    nlohmann::json j;
    j["format"] = "sollu-gmm";
    j["version"] = 1;
    j["dim"] = Dim;
    j["components"] = model.components;
    auto& cls = j["classes"] = nlohmann::json::array();
    for (const auto& [bol, g] : model.classes) {
        nlohmann::json c;
        c["code"] = code(bol);
        c["label"] = std::string(label(bol));
        c["weights"] = g.weights();
        c["means"] = g.means();
        c["variances"] = g.variances();
        cls.push_back(std::move(c));
    }
    return j;
}

template <std::size_t Dim>
BasicGmmModel<Dim> model_from_json(const nlohmann::json& j)
{
    if (j.value("format", "") != "sollu-gmm" || j.value("version", 0) != 1)
        throw Error("not a version 1 model file");
    if (j.at("dim").get<std::size_t>() != Dim)
        throw Error("model dimension mismatch");
    BasicGmmModel<Dim> m;
    m.components = j.at("components").get<std::size_t>();
    for (const auto& c : j.at("classes")) {
        const auto bol = bol_from_code(c.at("code").get<int>());
        if (!bol || *bol == Bol::unknown)
            throw Error("model contains an invalid class code");
        m.classes.emplace(*bol, DiagonalGmm<Dim>(
                                    c.at("weights").get<std::vector<double>>(),
                                    c.at("means").get<std::vector<std::array<double, Dim>>>(),
                                    c.at("variances").get<std::vector<std::array<double, Dim>>>()));
    }
    if (m.classes.empty())
        throw Error("model has no classes");
    return m;
}

inline GmmModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open model " + path.string());
    try {
        return model_from_json<kFeatureDim>(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed model file: " + std::string(e.what()));
    }
}

} // namespace sollu
