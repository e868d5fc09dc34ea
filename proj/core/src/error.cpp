#include "trnr/error.hpp"

namespace trnr {

void fail(const std::string& tag, const std::string& detail) {
  throw Error(detail.empty() ? tag : tag + ": " + detail);
}

}  // namespace trnr
