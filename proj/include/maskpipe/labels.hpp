#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace maskpipe {

/// Ordered class names. Ids are positions in the list.
class LabelCatalog {
 public:
  LabelCatalog(std::vector<std::string> names, std::vector<std::string> display_names);

  /// with_mask = 0, without_mask = 1, mask_weared_incorrect = 2.
  static const LabelCatalog& mask_task();

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::string>& display_names() const { return display_; }
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  const std::string& display_name(int id) const { return display_.at(static_cast<std::size_t>(id)); }
  std::optional<int> find(std::string_view name) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::string> display_;
};

}  // namespace maskpipe
