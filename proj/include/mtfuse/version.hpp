#pragma once

#define MTFUSE_VERSION "0.1.0"
