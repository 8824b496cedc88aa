#pragma once

#include "nostra/certchain.hpp"
#include "nostra/crypto.hpp"
#include "nostra/hex.hpp"
#include "nostra/keys.hpp"
#include "nostra/ledger.hpp"
#include "nostra/merkle.hpp"
#include "nostra/nostrify.hpp"
#include "nostra/verify.hpp"
