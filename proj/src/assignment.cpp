#include "dkm/assignment.hpp"

#include <algorithm>
#include <cmath>

namespace dkm {

Assignment::Assignment(const Params& params, uint64_t seed) : params_(params) {
    base_ = 3.0 * params.gamma;
    // Top level must satisfy rho_m / gamma >= sqrt(d) * delta so that S(m, z) = S.
    m_ = std::max(1, static_cast<int>(std::ceil(
                         std::log(2.0 * params.aspect() * params.gamma) / std::log(base_) - 1e-12)));
    scales_.resize(m_ + 1);
    hashes_.resize(m_ + 1);
    for (int i = 0; i <= m_; ++i) {
        scales_[i] = std::pow(base_, 2.0 * i);
        if (i > 0)
            hashes_[i] = std::make_unique<ConsistentHash>(params, rho(i), derive_seed(seed, "asg", i));
    }
    close_.resize(m_ + 1);
    sigma_.resize(m_ + 1);
    high_.resize(m_ + 1);
    rev_.resize(m_ + 1);
}

double Assignment::rho(int i) const { return 0.5 * std::pow(base_, i); }

HashKey Assignment::key(int level, const Point& p) const {
    if (level == 0) {
        HashKey k{0};
        k.insert(k.end(), p.begin(), p.end());
        return k;
    }
    return hashes_[level]->eval(p);
}

bool Assignment::s_empty(int level, const HashKey& z) const {
    if (level == 0) return centers_.count(Point(z.begin() + 1, z.end())) == 0;
    auto it = close_[level].find(z);
    return it == close_[level].end() || it->second.empty();
}

std::vector<Point> Assignment::centers() const {
    std::vector<Point> out;
    for (const auto& [s, rec] : centers_) out.push_back(s);
    return out;
}

double Assignment::weight(const Point& s) const {
    auto it = centers_.find(s);
    if (it == centers_.end()) throw UsageError("unknown center");
    return it->second.w_s;
}

const Moments& Assignment::assigned_moments(const Point& s) const {
    auto it = centers_.find(s);
    if (it == centers_.end()) throw UsageError("unknown center");
    return it->second.m;
}

double Assignment::assigned_cost() const {
    double c = 0;
    for (const auto& [s, rec] : centers_) c += rec.m.cost_at(s);
    return c;
}

void Assignment::credit(const Point& s, double w, const Moments& m, int sign) {
    auto& rec = centers_.at(s);
    rec.w_s += sign * w;
    rec.m.merge(m, sign);
}

void Assignment::refresh_slot(int level, const HashKey& z, const HashKey& zp, Low& low, bool active) {
    if (active) {
        double w = scale(level) * low.w;
        if (low.slot == FenwickSampler::npos) {
            low.slot = sampler_.add(w);
            if (slot_ref_.size() <= low.slot) slot_ref_.resize(low.slot + 1);
            slot_ref_[low.slot] = LowRef{level, z, zp};
        } else {
            sampler_.set(low.slot, w);
        }
    } else if (low.slot != FenwickSampler::npos) {
        sampler_.remove(low.slot);
        low.slot = FenwickSampler::npos;
    }
}

void Assignment::low_weight(int level, const HashKey& z, const HashKey& zp, uint64_t id,
                            const Point& p, double w, int sign) {
    ++touches_;
    auto& hmap = high_[level];
    High& h = hmap[z];
    auto lit = h.lows.find(zp);
    if (lit == h.lows.end()) {
        if (sign < 0) throw UsageError("low bucket missing on delete");
        lit = h.lows.emplace(zp, Low{}).first;
        lit->second.in_f = s_empty(level - 1, zp);
        rev_[level][zp].insert(z);
    }
    Low& low = lit->second;
    Moments single;
    single.add(p, w);
    low.w += sign * w;
    low.m.merge(single, sign);
    if (sign > 0) {
        size_t slot = low.bag.add(w);
        low.slot_of[id] = slot;
        if (low.id_of.size() <= slot) low.id_of.resize(slot + 1);
        low.id_of[slot] = id;
    } else {
        auto sit = low.slot_of.find(id);
        low.bag.remove(sit->second);
        low.slot_of.erase(sit);
    }
    bool hp = in_h_prime(level, z);
    if (low.in_f) {
        h.w_h += sign * w;
        h.m.merge(single, sign);
        if (hp) credit(sigma_[level].at(z), w, single, sign);
    }
    if (low.slot_of.empty()) {
        refresh_slot(level, z, zp, low, false);
        if (low.in_f) {
            // Drop residual rounding so an emptied low bucket leaves no trace upstream.
            h.w_h -= low.w;
        }
        auto rit = rev_[level].find(zp);
        rit->second.erase(z);
        if (rit->second.empty()) rev_[level].erase(rit);
        h.lows.erase(lit);
        if (h.lows.empty()) hmap.erase(z);
        return;
    }
    refresh_slot(level, z, zp, low, low.in_f && hp);
}

void Assignment::toggle_f(int level, const HashKey& z, const HashKey& zp, bool on) {
    ++touches_;
    High& h = high_[level].at(z);
    Low& low = h.lows.at(zp);
    if (low.in_f == on) return;
    low.in_f = on;
    int sign = on ? 1 : -1;
    h.w_h += sign * low.w;
    h.m.merge(low.m, sign);
    bool hp = in_h_prime(level, z);
    if (hp) credit(sigma_[level].at(z), low.w, low.m, sign);
    refresh_slot(level, z, zp, low, on && hp);
}

void Assignment::toggle_h_prime(int level, const HashKey& z, const Point& sigma, bool on) {
    ++touches_;
    if (on) sigma_[level][z] = sigma;
    auto hit = high_[level].find(z);
    if (hit != high_[level].end()) {
        High& h = hit->second;
        credit(sigma, h.w_h, h.m, on ? 1 : -1);
        for (auto& [zp, low] : h.lows)
            if (low.in_f) refresh_slot(level, z, zp, low, on);
    }
    if (!on) sigma_[level].erase(z);
}

void Assignment::move_sigma(int level, const HashKey& z, const Point& from, const Point& to) {
    ++touches_;
    sigma_[level][z] = to;
    auto hit = high_[level].find(z);
    if (hit == high_[level].end()) return;
    credit(from, hit->second.w_h, hit->second.m, -1);
    credit(to, hit->second.w_h, hit->second.m, +1);
}

void Assignment::s_emptiness_changed(int level, const HashKey& z, bool now_empty) {
    if (level + 1 > m_) return;
    auto rit = rev_[level + 1].find(z);
    if (rit == rev_[level + 1].end()) return;
    std::vector<HashKey> highs(rit->second.begin(), rit->second.end());
    for (const auto& zz : highs) toggle_f(level + 1, zz, z, now_empty);
}

void Assignment::insert_point(uint64_t id, const Point& p, double w) {
    if (points_.count(id)) throw UsageError("duplicate point id");
    PointRec rec{p, w, {}};
    for (int i = 0; i <= m_; ++i) rec.keys.push_back(key(i, p));
    const HashKey& k0 = rec.keys[0];
    loc_weight_[k0] += w;
    loc_ids_[k0].push_back(id);
    if (centers_.count(p)) {
        Moments single;
        single.add(p, w);
        credit(p, w, single, +1);
    }
    for (int i = 1; i <= m_; ++i) low_weight(i, rec.keys[i], rec.keys[i - 1], id, p, w, +1);
    points_.emplace(id, std::move(rec));
}

void Assignment::erase_point(uint64_t id) {
    auto it = points_.find(id);
    if (it == points_.end()) throw UsageError("unknown point id");
    PointRec rec = std::move(it->second);
    points_.erase(it);
    const HashKey& k0 = rec.keys[0];
    auto lw = loc_weight_.find(k0);
    lw->second -= rec.w;
    auto& ids = loc_ids_[k0];
    ids.erase(std::find(ids.begin(), ids.end(), id));
    if (ids.empty()) {
        loc_ids_.erase(k0);
        loc_weight_.erase(lw);
    }
    if (centers_.count(rec.p)) {
        Moments single;
        single.add(rec.p, rec.w);
        credit(rec.p, rec.w, single, -1);
    }
    for (int i = 1; i <= m_; ++i) low_weight(i, rec.keys[i], rec.keys[i - 1], id, rec.p, rec.w, -1);
}

void Assignment::insert_center(const Point& s) {
    if (centers_.count(s)) throw UsageError("duplicate center");
    CenterRec rec;
    rec.m = Moments(s);
    rec.phi.resize(m_ + 1);
    centers_.emplace(s, std::move(rec));
    HashKey k0 = key(0, s);
    auto lw = loc_weight_.find(k0);
    if (lw != loc_weight_.end()) {
        Moments self;
        self.add(s, lw->second);
        credit(s, lw->second, self, +1);
    }
    s_emptiness_changed(0, k0, false);
    for (int i = 1; i <= m_; ++i) {
        auto phi = hashes_[i]->ball_buckets(s);
        for (const auto& z : phi) {
            auto& set = close_[i][z];
            bool was_empty = set.empty();
            set.insert(s);
            ++touches_;
            if (was_empty) {
                toggle_h_prime(i, z, s, true);
                s_emptiness_changed(i, z, false);
            }
        }
        centers_.at(s).phi[i] = std::move(phi);
    }
}

void Assignment::erase_center(const Point& s) {
    auto cit = centers_.find(s);
    if (cit == centers_.end()) throw UsageError("unknown center");
    auto phi = cit->second.phi;
    for (int i = 1; i <= m_; ++i) {
        for (const auto& z : phi[i]) {
            auto& set = close_[i].at(z);
            set.erase(s);
            ++touches_;
            if (set.empty()) {
                toggle_h_prime(i, z, s, false);
                close_[i].erase(z);
                s_emptiness_changed(i, z, true);
            } else if (sigma_[i].at(z) == s) {
                move_sigma(i, z, s, *set.begin());
            }
        }
    }
    HashKey k0 = key(0, s);
    centers_.erase(s);
    s_emptiness_changed(0, k0, true);
}

std::optional<uint64_t> Assignment::d2_sample(CounterRng& rng) const {
    double total = sampler_.total();
    if (!(total > 0)) return std::nullopt;
    size_t slot = sampler_.find(rng.uniform() * total);
    if (slot == FenwickSampler::npos) return std::nullopt;
    const LowRef& ref = slot_ref_[slot];
    const Low& low = high_[ref.level].at(ref.z).lows.at(ref.zp);
    double lt = low.bag.total();
    size_t s2 = low.bag.find(rng.uniform() * lt);
    if (s2 == FenwickSampler::npos) return std::nullopt;
    return low.id_of[s2];
}

double Assignment::sample_probability(uint64_t id) const {
    const PointRec& rec = points_.at(id);
    double total = sampler_.total();
    if (!(total > 0)) return 0;
    for (int i = 1; i <= m_; ++i) {
        auto hit = high_[i].find(rec.keys[i]);
        if (hit == high_[i].end()) continue;
        auto lit = hit->second.lows.find(rec.keys[i - 1]);
        if (lit == hit->second.lows.end()) continue;
        const Low& low = lit->second;
        if (low.slot == FenwickSampler::npos || !(low.w > 0)) continue;
        return sampler_.weight(low.slot) / total * rec.w / low.w;
    }
    return 0;
}

std::vector<Assignment::Part> Assignment::partition() const {
    std::vector<Part> out;
    for (int i = 1; i <= m_; ++i) {
        for (const auto& [z, h] : high_[i]) {
            if (!in_h_prime(i, z)) continue;
            Part part{i, z, sigma_[i].at(z), {}};
            for (const auto& [zp, low] : h.lows)
                if (low.in_f)
                    for (const auto& [id, slot] : low.slot_of) part.ids.push_back(id);
            if (!part.ids.empty()) out.push_back(std::move(part));
        }
    }
    return out;
}

size_t Assignment::orphan_f_entries() const {
    size_t bad = 0;
    for (int i = 1; i <= m_; ++i)
        for (const auto& [z, h] : high_[i])
            for (const auto& [zp, low] : h.lows) {
                if (low.slot_of.empty()) ++bad;
                if (low.in_f != s_empty(i - 1, zp)) ++bad;
                bool active = low.in_f && in_h_prime(i, z);
                if (active != (low.slot != FenwickSampler::npos)) ++bad;
            }
    return bad;
}

bool Assignment::empty_state() const {
    if (!points_.empty() || !centers_.empty() || !loc_weight_.empty() || sampler_.live() != 0)
        return false;
    for (int i = 0; i <= m_; ++i)
        if (!close_[i].empty() || !sigma_[i].empty() || !high_[i].empty() || !rev_[i].empty())
            return false;
    return true;
}

}  // namespace dkm
