#pragma once

#include <httplib.h>

// httplib pulls in <resolv.h>, whose `_res` macro collides with Eigen's
// parameter names.
#undef _res
