#pragma once

#define EVMCHAOS_VERSION "0.1.0"
