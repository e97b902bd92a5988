#include "mvreem/error.hpp"

namespace mvreem {

void throw_data_error(const std::string& msg) { throw DataError(msg); }

}  // namespace mvreem
