#include "wafersim/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace wafersim {

std::vector<RunOutcome> run_many(const std::vector<SimConfig>& configs, unsigned threads) {
  std::vector<RunOutcome> out(configs.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(configs.size(), 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        out[i].record = run(configs[i]);
      } catch (const std::exception& ex) {
        out[i].error = ex.what();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  return out;
}

std::vector<SweepPoint> sweep(const SimConfig& base, const std::vector<SweepAxis>& axes, unsigned threads) {
  const Json base_json = to_json(base);
  std::size_t total = 1;
  for (const auto& axis : axes) total *= axis.values.size();

  std::vector<SweepPoint> points(total);
  std::vector<SimConfig> configs;
  std::vector<std::size_t> runnable;
  for (std::size_t i = 0; i < total; ++i) {
    Json j = base_json;
    Json params = Json::object();
    std::string label;
    std::size_t rem = i;
    std::size_t stride = total;
    for (const auto& axis : axes) {
      stride /= axis.values.size();
      const Json& value = axis.values[rem / stride];
      rem %= stride;
      params[axis.path] = value;
      label += (label.empty() ? "" : ",") + axis.path + "=" + (value.is_string() ? value.get<std::string>() : value.dump());
    }
    points[i].params = params;
    points[i].label = label.empty() ? (base.label.empty() ? "base" : base.label) : label;
    try {
      for (const auto& [path, value] : params.items()) set_json_path(j, path, value);
      j["label"] = points[i].label;
      SimConfig c = base;
      apply_json(j, c);
      c.validate();
      configs.push_back(std::move(c));
      runnable.push_back(i);
    } catch (const std::exception& ex) {
      points[i].outcome.error = ex.what();
    }
  }
  auto outcomes = run_many(configs, threads);
  for (std::size_t k = 0; k < runnable.size(); ++k) points[runnable[k]].outcome = std::move(outcomes[k]);
  return points;
}

}  // namespace wafersim
