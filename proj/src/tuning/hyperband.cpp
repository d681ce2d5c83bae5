// SPDX-License-Identifier: Apache-2.0
#include "tuning/hyperband.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "common/error.hpp"

namespace depscreen {

void HyperbandConfig::validate() const {
  if (eta < 2) fail(ErrorCode::kValidation, "eta must be at least 2");
  if (max_resource < eta) fail(ErrorCode::kValidation, "max_resource must be at least eta");
  if (iterations < 1) fail(ErrorCode::kValidation, "iterations must be positive");
  if (patience < 1) fail(ErrorCode::kValidation, "patience must be positive");
}

int hyperband_s_max(const HyperbandConfig& cfg) {
  cfg.validate();
  int s = 0;
  long p = cfg.eta;
  while (p <= cfg.max_resource) {
    ++s;
    p *= cfg.eta;
  }
  return s;
}

std::vector<Bracket> hyperband_schedule(const HyperbandConfig& cfg) {
  const int s_max = hyperband_s_max(cfg);
  std::vector<Bracket> out;
  for (int s = s_max; s >= 0; --s) {
    long eta_s = 1;
    for (int i = 0; i < s; ++i) eta_s *= cfg.eta;
    Bracket b;
    b.s = s;
    long n = ((s_max + 1) * eta_s + s) / (s + 1);  // ceil((s_max+1) eta^s / (s+1))
    long eta_i = 1;
    for (int i = 0; i <= s; ++i) {
      const long epochs = std::max<long>(1, cfg.max_resource * eta_i / eta_s);
      b.rungs.push_back(Rung{static_cast<int>(n), static_cast<int>(epochs)});
      n /= cfg.eta;
      eta_i *= cfg.eta;
    }
    out.push_back(std::move(b));
  }
  return out;
}

namespace {

template <typename T>
void check_axis(const std::vector<T>& axis, const char* name) {
  if (axis.empty()) fail(ErrorCode::kEmptySpace, std::string("search axis ") + name + " has no options");
}

}  // namespace

std::size_t SearchSpace::size() const {
  check_axis(bilstm1_units, "bilstm1_units");
  check_axis(dropout1, "dropout1");
  check_axis(bilstm2_units, "bilstm2_units");
  check_axis(dropout2, "dropout2");
  check_axis(bilstm3_units, "bilstm3_units");
  check_axis(dropout3, "dropout3");
  check_axis(n_dense, "n_dense");
  return bilstm1_units.size() * dropout1.size() * bilstm2_units.size() * dropout2.size() * bilstm3_units.size() *
         dropout3.size() * n_dense.size() * std::max<std::size_t>(1, fusion_dropout.size());
}

FusionHyperparams SearchSpace::at(std::size_t index) const {
  if (index >= size()) fail(ErrorCode::kInvalidArgument, "search-space index out of range");
  FusionHyperparams h = base;
  auto take = [&index](const auto& axis) {
    const auto& v = axis[index % axis.size()];
    index /= axis.size();
    return v;
  };
  h.bilstm1_units = take(bilstm1_units);
  h.dropout1 = take(dropout1);
  h.bilstm2_units = take(bilstm2_units);
  h.dropout2 = take(dropout2);
  h.bilstm3_units = take(bilstm3_units);
  h.dropout3 = take(dropout3);
  h.n_dense = take(n_dense);
  if (!fusion_dropout.empty()) h.fusion_dropout = take(fusion_dropout);
  return h;
}

std::vector<FusionHyperparams> SearchSpace::enumerate() const {
  std::vector<FusionHyperparams> out;
  const std::size_t n = size();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(at(i));
  return out;
}

SearchSpace SearchSpace::single(const FusionHyperparams& h) {
  SearchSpace s;
  s.base = h;
  s.bilstm1_units = {h.bilstm1_units};
  s.dropout1 = {h.dropout1};
  s.bilstm2_units = {h.bilstm2_units};
  s.dropout2 = {h.dropout2};
  s.bilstm3_units = {h.bilstm3_units};
  s.dropout3 = {h.dropout3};
  s.n_dense = {h.n_dense};
  return s;
}

nlohmann::json SearchSpace::to_json() const {
  nlohmann::json j{{"bilstm1_units", bilstm1_units}, {"dropout1", dropout1}, {"bilstm2_units", bilstm2_units},
                   {"dropout2", dropout2},           {"bilstm3_units", bilstm3_units}, {"dropout3", dropout3},
                   {"n_dense", n_dense},             {"base", base.to_json()}};
  if (!fusion_dropout.empty()) j["fusion_dropout"] = fusion_dropout;
  return j;
}

SearchSpace SearchSpace::from_json(const nlohmann::json& j) {
  SearchSpace s;
  try {
    if (j.contains("base")) s.base = FusionHyperparams::from_json(j.at("base"));
    s.bilstm1_units = j.value("bilstm1_units", s.bilstm1_units);
    s.dropout1 = j.value("dropout1", s.dropout1);
    s.bilstm2_units = j.value("bilstm2_units", s.bilstm2_units);
    s.dropout2 = j.value("dropout2", s.dropout2);
    s.bilstm3_units = j.value("bilstm3_units", s.bilstm3_units);
    s.dropout3 = j.value("dropout3", s.dropout3);
    s.n_dense = j.value("n_dense", s.n_dense);
    s.fusion_dropout = j.value("fusion_dropout", s.fusion_dropout);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kValidation, std::string("bad search space: ") + e.what());
  }
  return s;
}

std::string SearchResult::trial_log_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "iteration,bracket,rung,trial,config_hash,epochs_allocated,epochs_run,val_loss,bilstm1_units,dropout1,"
         "bilstm2_units,dropout2,bilstm3_units,dropout3,n_dense,fusion_dropout\n";
  for (const auto& t : trials) {
    const auto& h = t.hyperparams;
    out << t.iteration << ',' << t.bracket << ',' << t.rung << ',' << t.trial << ',' << h.hash() << ','
        << t.epochs_allocated << ',' << t.epochs_run << ',' << t.val_loss << ',' << h.bilstm1_units << ','
        << h.dropout1 << ',' << h.bilstm2_units << ',' << h.dropout2 << ',' << h.bilstm3_units << ',' << h.dropout3
        << ',' << h.n_dense << ',' << h.fusion_dropout << '\n';
  }
  return out.str();
}

std::vector<std::pair<std::pair<int, int>, long>> SearchResult::epochs_per_bracket() const {
  std::vector<std::pair<std::pair<int, int>, long>> out;
  for (const auto& t : trials) {
    const std::pair<int, int> key{t.iteration, t.bracket};
    if (out.empty() || out.back().first != key) out.push_back({key, 0});
    out.back().second += t.epochs_run;
  }
  return out;
}

SearchResult hyperband_search(const SearchSpace& space, const SegmentSet& train_set, const SegmentSet& val_set,
                              const HyperbandConfig& cfg, std::uint64_t seed, int t_frames, int n_mfcc,
                              const std::function<void(const TrialRecord&)>& on_trial) {
  cfg.validate();
  const std::size_t space_size = space.size();
  if (val_set.empty()) fail(ErrorCode::kValidation, "hyperband needs a validation set");
  std::set<int> train_ids;
  for (const auto& e : train_set) train_ids.insert(e.interview_id);
  for (const auto& e : val_set) {
    if (train_ids.count(e.interview_id)) {
      fail(ErrorCode::kLeakageDetected, "interview " + std::to_string(e.interview_id) + " is in both training and validation sets");
    }
  }
  std::vector<int> labels;
  for (const auto& e : train_set) labels.push_back(e.label);
  const ClassWeights weights = class_weights(labels);

  SearchResult result;
  bool have_best = false;
  std::mutex log_mutex;
  for (int it = 0; it < cfg.iterations; ++it) {
    for (const Bracket& bracket : hyperband_schedule(cfg)) {
      Rng sampler(derive_seed(seed, {0x4b, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(bracket.s)}));
      std::vector<std::size_t> configs;
      for (int i = 0; i < bracket.rungs.front().n_configs; ++i) configs.push_back(uniform_index(sampler, space_size));
      std::vector<int> alive(configs.size());
      std::iota(alive.begin(), alive.end(), 0);

      for (std::size_t r = 0; r < bracket.rungs.size(); ++r) {
        const Rung& rung = bracket.rungs[r];
        alive.resize(std::min<std::size_t>(alive.size(), static_cast<std::size_t>(rung.n_configs)));
        std::vector<TrialRecord> records(alive.size());
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        auto worker = [&] {
          for (std::size_t k = next++; k < alive.size(); k = next++) {
            try {
              TrialRecord rec;
              rec.iteration = it;
              rec.bracket = bracket.s;
              rec.rung = static_cast<int>(r);
              rec.trial = alive[k];
              rec.hyperparams = space.at(configs[static_cast<std::size_t>(alive[k])]);
              rec.epochs_allocated = rung.epochs;
              const std::uint64_t trial_seed =
                  derive_seed(seed, {static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(bracket.s),
                                     static_cast<std::uint64_t>(alive[k])});
              FusionModel model(rec.hyperparams, t_frames, trial_seed, n_mfcc);
              TrainOptions opt;
              opt.max_epochs = rung.epochs;
              opt.patience = cfg.patience;
              opt.seed = trial_seed;
              const TrainResult tr = train(model, train_set, &val_set, weights, opt);
              rec.epochs_run = static_cast<int>(tr.history.epochs.size());
              rec.val_loss = tr.history.epochs[static_cast<std::size_t>(tr.history.best_epoch - 1)].val_loss;
              records[k] = rec;
            } catch (...) {
              std::lock_guard lock(log_mutex);
              if (!error) error = std::current_exception();
              next = alive.size();
            }
          }
        };
        const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(alive.size())));
        if (workers == 1) {
          worker();
        } else {
          std::vector<std::thread> pool;
          for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
          for (auto& t : pool) t.join();
        }
        if (error) std::rethrow_exception(error);

        for (const auto& rec : records) {
          result.trials.push_back(rec);
          if (on_trial) on_trial(rec);
          if (!have_best || rec.val_loss < result.best_val_loss) {
            have_best = true;
            result.best = rec.hyperparams;
            result.best_val_loss = rec.val_loss;
          }
        }
        // Survivors: lowest validation loss, ties to the earlier trial.
        std::vector<std::size_t> order(records.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          if (records[a].val_loss != records[b].val_loss) return records[a].val_loss < records[b].val_loss;
          return records[a].trial < records[b].trial;
        });
        const std::size_t keep = records.size() / static_cast<std::size_t>(cfg.eta);
        std::vector<int> next_alive;
        for (std::size_t i = 0; i < keep; ++i) next_alive.push_back(records[order[i]].trial);
        alive = std::move(next_alive);
        if (alive.empty()) break;
      }
    }
  }
  return result;
}

}  // namespace depscreen
