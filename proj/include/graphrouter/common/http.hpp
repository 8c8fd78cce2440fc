#pragma once

// The library default of 5 drops connections under concurrent load well
// below what the routing service is expected to absorb.
#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#endif

#include <httplib.h>

// glibc's resolv.h, which the socket headers above pull in, leaves an
// object-like macro `_res` behind. Any later declaration using `_res` as an
// identifier (Eigen has several) gets silently rewritten into nonsense, so
// scrub it here. Include this header instead of <httplib.h> everywhere.
#ifdef _res
#undef _res
#endif
