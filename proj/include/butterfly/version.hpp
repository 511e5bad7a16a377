#pragma once

namespace butterfly {

// git-describe-style string fixed at configure time.
const char* version_string();

}  // namespace butterfly
