#pragma once

// Umbrella header for the email-wallet simulator library.

#include "emailwallet/aggregator.hpp"
#include "emailwallet/amount.hpp"
#include "emailwallet/base64.hpp"
#include "emailwallet/chain.hpp"
#include "emailwallet/chain_store.hpp"
#include "emailwallet/dfa.hpp"
#include "emailwallet/dkim.hpp"
#include "emailwallet/email.hpp"
#include "emailwallet/errors.hpp"
#include "emailwallet/proof.hpp"
#include "emailwallet/regex_ast.hpp"
#include "emailwallet/rsa.hpp"
#include "emailwallet/rule.hpp"
#include "emailwallet/sha256.hpp"
#include "emailwallet/util.hpp"
