#include "stagger/estimate.hpp"

#include <charconv>

#include "stagger/error.hpp"

namespace stagger {

Estimand Estimand::parse(const std::string& text) {
  if (text == "overall") return overall();
  const std::string prefix = "capped:";
  if (text.rfind(prefix, 0) == 0) {
    int horizon = 0;
    const char* first = text.data() + prefix.size();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, horizon);
    if (ec == std::errc() && ptr == last && horizon >= 1) return capped(horizon);
  }
  throw Error(ErrorKind::InvalidInput, "estimand must be 'overall' or 'capped:P' with P >= 1, got '" + text + "'");
}

const char* to_string(FirstStage fs) noexcept {
  switch (fs) {
    case FirstStage::untreated: return "untreated";
    case FirstStage::interacted: return "interacted";
    case FirstStage::saturated: return "saturated";
  }
  return "untreated";
}

FirstStage parse_first_stage(const std::string& text) {
  if (text == "untreated") return FirstStage::untreated;
  if (text == "interacted") return FirstStage::interacted;
  if (text == "saturated") return FirstStage::saturated;
  throw Error(ErrorKind::InvalidInput, "first stage must be untreated, interacted or saturated, got '" + text + "'");
}

Eigen::Index Estimate::index_of_rel(int r) const {
  for (std::size_t j = 0; j < rel_times.size(); ++j) {
    if (rel_times[j] == r) return static_cast<Eigen::Index>(j);
  }
  throw Error(ErrorKind::InvalidInput, "estimate has no coefficient at relative time " + std::to_string(r));
}

const EffectCell* EffectGrid::find(int adoption, int time) const {
  for (const auto& c : cells) {
    if (c.adoption == adoption && c.time == time) return &c;
  }
  return nullptr;
}

}  // namespace stagger
