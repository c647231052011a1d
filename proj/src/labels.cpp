#include "maskpipe/labels.hpp"

#include <algorithm>
#include <set>

#include "maskpipe/errors.hpp"

namespace maskpipe {

LabelCatalog::LabelCatalog(std::vector<std::string> names, std::vector<std::string> display_names)
    : names_(std::move(names)), display_(std::move(display_names)) {
  if (display_.empty()) display_ = names_;
  if (display_.size() != names_.size()) throw ConfigError("label catalog: display name count mismatch");
  if (std::set<std::string>(names_.begin(), names_.end()).size() != names_.size()) {
    throw ConfigError("label catalog: duplicate class names");
  }
}

const LabelCatalog& LabelCatalog::mask_task() {
  static const LabelCatalog catalog({"with_mask", "without_mask", "mask_weared_incorrect"},
                                    {"With mask", "Without mask", "Mask worn incorrectly"});
  return catalog;
}

std::optional<int> LabelCatalog::find(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

}  // namespace maskpipe
