#include "attnres/pipesim.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "attnres/csvio.hpp"

namespace attnres {

void PipelineConfig::validate() const {
    if (physical_stages < 1 || virtual_stages < 1) {
        throw std::invalid_argument("pipeline: stages must be >= 1");
    }
    if (blocks_per_chunk.num <= 0) {
        throw std::invalid_argument("pipeline: Np must be positive");
    }
    if (hidden_dim < 1) throw std::invalid_argument("pipeline: d must be >= 1");
}

Rational comm_naive(const PipelineConfig& cfg) {
    cfg.validate();
    const std::int64_t C = cfg.chunks();
    return Rational(C * (C - 1), 2) * cfg.blocks_per_chunk * Rational(cfg.hidden_dim);
}

Rational comm_cached(const PipelineConfig& cfg) {
    cfg.validate();
    const std::int64_t P = cfg.physical_stages;
    const std::int64_t V = cfg.virtual_stages;
    return (Rational(P * (P - 1), 2) + Rational((V - 1) * P * P)) *
           cfg.blocks_per_chunk * Rational(cfg.hidden_dim);
}

TransferLog simulate(const PipelineConfig& cfg, bool caching) {
    cfg.validate();
    const int P = cfg.physical_stages;
    const int C = cfg.chunks();
    const Rational Np = cfg.blocks_per_chunk;
    const Rational d(cfg.hidden_dim);

    TransferLog log;
    log.caching = caching;
    log.cache_counts.assign(P, {});
    log.total_blocks = Rational(0);
    log.total_elements = Rational(0);
    log.peak_blocks = Rational(0);

    Rational accumulated(0);                 // blocks produced so far
    std::vector<Rational> cache(P, Rational(0));  // what each rank holds
    log.cache_counts[0].push_back(cache[0]);      // rank 0 starts empty

    for (int c = 0; c < C; ++c) {
        if (c > 0) {
            const int to_rank = c % P;
            Transfer t;
            t.from_chunk = c - 1;
            t.to_chunk = c;
            t.from_rank = (c - 1) % P;
            t.to_rank = to_rank;
            t.blocks = caching ? accumulated - cache[to_rank] : accumulated;
            t.elements = t.blocks * d;
            log.total_blocks = log.total_blocks + t.blocks;
            log.total_elements = log.total_elements + t.elements;
            if (t.blocks.to_double() > log.peak_blocks.to_double()) {
                log.peak_blocks = t.blocks;
            }
            log.transfers.push_back(std::move(t));
            cache[to_rank] = accumulated;  // cache holds everything received
            log.cache_counts[to_rank].push_back(cache[to_rank]);
        }
        accumulated = accumulated + Np;  // this chunk's production
    }
    return log;
}

void ExplicitSchedule::validate() const {
    if (physical_stages < 1 || virtual_stages < 1 || hidden_dim < 1) {
        throw std::invalid_argument("pipeline: bad explicit schedule shape");
    }
    if (static_cast<int>(completions.size()) != physical_stages * virtual_stages) {
        throw std::invalid_argument("pipeline: need one completion list per chunk");
    }
}

TransferLog simulate(const ExplicitSchedule& sched, bool caching) {
    sched.validate();
    const int P = sched.physical_stages;
    const int C = P * sched.virtual_stages;
    const Rational d(sched.hidden_dim);

    TransferLog log;
    log.caching = caching;
    log.cache_sets.assign(P, {});
    log.total_blocks = Rational(0);
    log.total_elements = Rational(0);
    log.peak_blocks = Rational(0);

    std::set<int> current(sched.initial_blocks.begin(), sched.initial_blocks.end());
    std::vector<std::set<int>> cache(P);
    cache[0] = current;  // the input arrives on rank 0 with the embedding
    log.cache_sets[0].push_back({current.begin(), current.end()});

    for (int c = 0; c < C; ++c) {
        if (c > 0) {
            const int to_rank = c % P;
            Transfer t;
            t.from_chunk = c - 1;
            t.to_chunk = c;
            t.from_rank = (c - 1) % P;
            t.to_rank = to_rank;
            if (caching) {
                std::set_difference(current.begin(), current.end(),
                                    cache[to_rank].begin(), cache[to_rank].end(),
                                    std::back_inserter(t.block_ids));
            } else {
                t.block_ids.assign(current.begin(), current.end());
            }
            t.blocks = Rational(static_cast<std::int64_t>(t.block_ids.size()));
            t.elements = t.blocks * d;
            log.total_blocks = log.total_blocks + t.blocks;
            log.total_elements = log.total_elements + t.elements;
            if (t.blocks.to_double() > log.peak_blocks.to_double()) {
                log.peak_blocks = t.blocks;
            }
            cache[to_rank] = current;
            log.cache_sets[to_rank].push_back({cache[to_rank].begin(), cache[to_rank].end()});
            log.transfers.push_back(std::move(t));
        }
        for (int id : sched.completions[c]) current.insert(id);
    }
    return log;
}

std::string TransferLog::to_csv() const {
    std::string s = "# caching=" + std::string(caching ? "on" : "off") +
                    " total_blocks=" + total_blocks.str() +
                    " total_elements=" + total_elements.str() + "\n";
    s += "from_chunk,to_chunk,from_rank,to_rank,blocks,elements,block_ids\n";
    for (const Transfer& t : transfers) {
        s += std::to_string(t.from_chunk) + "," + std::to_string(t.to_chunk) + "," +
             std::to_string(t.from_rank) + "," + std::to_string(t.to_rank) + "," +
             t.blocks.str() + "," + t.elements.str() + ",";
        for (std::size_t i = 0; i < t.block_ids.size(); ++i) {
            if (i) s += " ";
            s += "b" + std::to_string(t.block_ids[i]);
        }
        s += "\n";
    }
    return s;
}

std::string TransferLog::to_json() const {
    nlohmann::json j;
    j["caching"] = caching;
    j["total_blocks"] = total_blocks.str();
    j["total_elements"] = total_elements.str();
    j["total_elements_value"] = total_elements.to_double();
    j["peak_blocks"] = peak_blocks.str();
    j["transfers"] = nlohmann::json::array();
    for (const Transfer& t : transfers) {
        nlohmann::json jt;
        jt["from_chunk"] = t.from_chunk;
        jt["to_chunk"] = t.to_chunk;
        jt["from_rank"] = t.from_rank;
        jt["to_rank"] = t.to_rank;
        jt["blocks"] = t.blocks.str();
        jt["elements"] = t.elements.str();
        if (!t.block_ids.empty() || !cache_sets.empty()) jt["block_ids"] = t.block_ids;
        j["transfers"].push_back(std::move(jt));
    }
    if (!cache_sets.empty()) {
        j["rank_caches"] = nlohmann::json::array();
        for (const auto& per_rank : cache_sets) j["rank_caches"].push_back(per_rank);
    } else {
        j["rank_cache_counts"] = nlohmann::json::array();
        for (const auto& per_rank : cache_counts) {
            nlohmann::json arr = nlohmann::json::array();
            for (const Rational& r : per_rank) arr.push_back(r.str());
            j["rank_cache_counts"].push_back(std::move(arr));
        }
    }
    return j.dump(2) + "\n";
}

}  // namespace attnres
